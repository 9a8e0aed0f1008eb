//! Dense grid types and the numeric primitives everything else builds on.
//!
//! All grids are row-major by `(y, x, channel)`. That layout is part of the
//! file-format and oracle contracts, so it is declared once here and never
//! deviated from.

use crate::error::{Error, Result};

/// Dense `height x width x channels` grid of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    /// Zero-filled grid.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "grid dims must be positive");
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    /// Wraps raw row-major `(y, x, c)` data. Rejects wrong lengths and
    /// non-finite values.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::LengthMismatch {
                context: "feature grid data",
                expected: height * width * channels,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature grid contains non-finite values".into()));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, y: usize, x: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Channel vector at an integer cell.
    #[inline]
    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        let o = self.offset(y, x);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let o = self.offset(y, x);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    /// Bilinear sample of every channel at real coordinates; see
    /// [`bilinear_sample`] for the boundary contract.
    pub fn sample(&self, x: f64, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.sample_into(x, y, &mut out);
        out
    }

    /// Like [`FeatureGrid::sample`] but writes into a caller buffer.
    pub fn sample_into(&self, x: f64, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        match Bilinear::at(x, y, self.height, self.width) {
            None => out.fill(0.0),
            Some(b) => {
                let c00 = self.cell(b.y0, b.x0);
                let c01 = self.cell(b.y0, b.x1);
                let c10 = self.cell(b.y1, b.x0);
                let c11 = self.cell(b.y1, b.x1);
                for ch in 0..self.channels {
                    out[ch] = b.w00 * c00[ch] + b.w01 * c01[ch] + b.w10 * c10[ch] + b.w11 * c11[ch];
                }
            }
        }
    }
}

/// `height x width` grid of object ids; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl LabelMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dims must be positive");
        Self { height, width, labels: vec![0; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::LengthMismatch {
                context: "label mask data",
                expected: height * width,
                got: labels.len(),
            });
        }
        Ok(Self { height, width, labels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, label: u32) {
        self.labels[y * self.width + x] = label;
    }

    /// Distinct non-background ids present, ascending.
    pub fn object_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Binary probability mask (0/1) of one object.
    pub fn object_mask(&self, object_id: u32) -> ProbMask {
        let values = self.labels.iter().map(|&l| if l == object_id { 1.0 } else { 0.0 }).collect();
        ProbMask::from_vec(self.height, self.width, values).expect("0/1 values are valid")
    }

    /// Majority label per `cell x cell` block; ties go to the smallest label.
    pub fn downscale_majority(&self, cell: usize) -> Result<LabelMask> {
        let (fh, fw) = downscaled_dims(self.height, self.width, cell, "label mask")?;
        let mut out = LabelMask::zeros(fh, fw);
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for fy in 0..fh {
            for fx in 0..fw {
                counts.clear();
                for dy in 0..cell {
                    for dx in 0..cell {
                        let l = self.get(fy * cell + dy, fx * cell + dx);
                        match counts.iter_mut().find(|(lab, _)| *lab == l) {
                            Some((_, n)) => *n += 1,
                            None => counts.push((l, 1)),
                        }
                    }
                }
                counts.sort_by_key(|&(lab, n)| (std::cmp::Reverse(n), lab));
                out.set(fy, fx, counts[0].0);
            }
        }
        Ok(out)
    }
}

/// `height x width` grid of per-cell probabilities in `[0, 1]` for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dims must be positive");
        Self { height, width, values: vec![0.0; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::LengthMismatch {
                context: "probability mask data",
                expected: height * width,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidInput("probability mask values must lie in [0, 1]".into()));
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v));
        self.values[y * self.width + x] = v;
    }

    /// Bilinear sample with the shared boundary contract.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        match Bilinear::at(x, y, self.height, self.width) {
            None => 0.0,
            Some(b) => {
                b.w00 * self.get(b.y0, b.x0)
                    + b.w01 * self.get(b.y0, b.x1)
                    + b.w10 * self.get(b.y1, b.x0)
                    + b.w11 * self.get(b.y1, b.x1)
            }
        }
    }

    /// Count of cells at or above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v >= threshold).count()
    }

    /// Binarized copy: `1.0` where `value >= threshold`, else `0.0`.
    pub fn binarize(&self, threshold: f64) -> ProbMask {
        let values =
            self.values.iter().map(|&v| if v >= threshold { 1.0 } else { 0.0 }).collect();
        ProbMask { height: self.height, width: self.width, values }
    }

    /// Mean value per `cell x cell` block.
    pub fn downscale_mean(&self, cell: usize) -> Result<ProbMask> {
        let (fh, fw) = downscaled_dims(self.height, self.width, cell, "probability mask")?;
        let mut out = ProbMask::zeros(fh, fw);
        let norm = 1.0 / (cell * cell) as f64;
        for fy in 0..fh {
            for fx in 0..fw {
                let mut sum = 0.0;
                for dy in 0..cell {
                    for dx in 0..cell {
                        sum += self.get(fy * cell + dy, fx * cell + dx);
                    }
                }
                out.set(fy, fx, (sum * norm).clamp(0.0, 1.0));
            }
        }
        Ok(out)
    }

    /// Nearest upscale by an integer factor (each cell becomes a block).
    pub fn upscale_nearest(&self, cell: usize) -> ProbMask {
        assert!(cell > 0);
        let mut out = ProbMask::zeros(self.height * cell, self.width * cell);
        for y in 0..out.height {
            for x in 0..out.width {
                out.set(y, x, self.get(y / cell, x / cell));
            }
        }
        out
    }
}

/// Binary `height x width` map restricting where matching may happen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    on: Vec<bool>,
}

impl AttentionMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "map dims must be positive");
        Self { height, width, on: vec![false; height * width] }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "map dims must be positive");
        Self { height, width, on: vec![true; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.on[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.on[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.on.iter().filter(|&&b| b).count()
    }

    pub fn is_all_on(&self) -> bool {
        self.on.iter().all(|&b| b)
    }

    pub fn is_all_off(&self) -> bool {
        self.on.iter().all(|&b| !b)
    }

    /// Linear indices (`y * width + x`) of active cells, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        self.on.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }
}

/// Per-pixel `(dx, dy)` displacements. The stored vector at `(x, y)` is the
/// forward motion of the surface visible there since the previous frame, so
/// backward warping samples the previous frame at `(x - dx, y - dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    // interleaved (dx, dy), row-major
    data: Vec<f64>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "flow dims must be positive");
        Self { height, width, data: vec![0.0; height * width * 2] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 2 {
            return Err(Error::LengthMismatch {
                context: "flow field data",
                expected: height * width * 2,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flow field contains non-finite values".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Interleaved `(dx, dy)` pairs, row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f64, f64) {
        let o = (y * self.width + x) * 2;
        (self.data[o], self.data[o + 1])
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, dx: f64, dy: f64) {
        let o = (y * self.width + x) * 2;
        self.data[o] = dx;
        self.data[o + 1] = dy;
    }

    /// Mean displacement per `cell x cell` block, rescaled into block units.
    pub fn downscale_mean(&self, cell: usize) -> Result<FlowField> {
        let (fh, fw) = downscaled_dims(self.height, self.width, cell, "flow field")?;
        let mut out = FlowField::zeros(fh, fw);
        let norm = 1.0 / (cell * cell) as f64;
        for fy in 0..fh {
            for fx in 0..fw {
                let mut sx = 0.0;
                let mut sy = 0.0;
                for dy in 0..cell {
                    for dx in 0..cell {
                        let (vx, vy) = self.get(fy * cell + dy, fx * cell + dx);
                        sx += vx;
                        sy += vy;
                    }
                }
                out.set(fy, fx, sx * norm / cell as f64, sy * norm / cell as f64);
            }
        }
        Ok(out)
    }
}

fn downscaled_dims(h: usize, w: usize, cell: usize, what: &str) -> Result<(usize, usize)> {
    if cell == 0 || h % cell != 0 || w % cell != 0 {
        return Err(Error::InvalidInput(format!(
            "{what} dims {h}x{w} not divisible by cell {cell}"
        )));
    }
    Ok((h / cell, w / cell))
}

/// Inclusive integer bounding box, or the empty sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundingBox {
    Empty,
    Rect { x_min: usize, y_min: usize, x_max: usize, y_max: usize },
}

impl BoundingBox {
    pub fn is_empty(&self) -> bool {
        matches!(self, BoundingBox::Empty)
    }

    /// Cell count; 0 for the empty sentinel.
    pub fn area(&self) -> usize {
        match *self {
            BoundingBox::Empty => 0,
            BoundingBox::Rect { x_min, y_min, x_max, y_max } => {
                (x_max - x_min + 1) * (y_max - y_min + 1)
            }
        }
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            BoundingBox::Empty => false,
            BoundingBox::Rect { x_min, y_min, x_max, y_max } => {
                x >= x_min && x <= x_max && y >= y_min && y <= y_max
            }
        }
    }
}

struct Bilinear {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    w00: f64,
    w01: f64,
    w10: f64,
    w11: f64,
}

impl Bilinear {
    /// Weights for the four neighbors of `(x, y)`, or `None` when the sample
    /// point lies strictly outside `[0, W-1] x [0, H-1]` (callers fill 0).
    #[inline]
    fn at(x: f64, y: f64, height: usize, width: usize) -> Option<Bilinear> {
        let max_x = (width - 1) as f64;
        let max_y = (height - 1) as f64;
        if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
            return None;
        }
        // Clamp the base cell so x = W-1 lands on the last pair with fx = 1.
        let x0 = (x.floor() as usize).min(width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(height.saturating_sub(2));
        let x1 = (x0 + 1).min(width - 1);
        let y1 = (y0 + 1).min(height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        Some(Bilinear {
            x0,
            x1,
            y0,
            y1,
            w00: (1.0 - fy) * (1.0 - fx),
            w01: (1.0 - fy) * fx,
            w10: fy * (1.0 - fx),
            w11: fy * fx,
        })
    }
}

/// Bilinear interpolation of a single-channel view at real coordinates.
///
/// Samples strictly outside `[0, W-1] x [0, H-1]` return the out-of-bounds
/// fill value 0: a warped mask outside the frame means "object not there".
pub fn bilinear_sample(grid: &ProbMask, x: f64, y: f64) -> f64 {
    grid.sample(x, y)
}

/// Numerically stable softmax with exact exclusion support.
///
/// `f64::NEG_INFINITY` marks excluded entries; they contribute exactly zero
/// mass to the output. Returns an error when every entry is excluded (or the
/// input is empty), since there is no matching region to normalize over.
pub fn stable_softmax(weights: &[f64]) -> Result<Vec<f64>> {
    let mut max = f64::NEG_INFINITY;
    for &w in weights {
        debug_assert!(!w.is_nan() && w != f64::INFINITY, "softmax input must be finite or -inf");
        if w > max {
            max = w;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyMatchingRegion("all softmax entries are excluded"));
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut sum = 0.0;
    for &w in weights {
        let e = if w == f64::NEG_INFINITY { 0.0 } else { (w - max).exp() };
        sum += e;
        out.push(e);
    }
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Clamps raw inclusive box coordinates into `(H, W)` bounds.
///
/// Inverted raw boxes and boxes with no intersection with the grid collapse
/// to [`BoundingBox::Empty`].
pub fn clamp_box(raw: (i64, i64, i64, i64), bounds: (usize, usize)) -> BoundingBox {
    let (x_min, y_min, x_max, y_max) = raw;
    let (h, w) = bounds;
    if h == 0 || w == 0 || x_min > x_max || y_min > y_max {
        return BoundingBox::Empty;
    }
    if x_max < 0 || y_max < 0 || x_min >= w as i64 || y_min >= h as i64 {
        return BoundingBox::Empty;
    }
    BoundingBox::Rect {
        x_min: x_min.max(0) as usize,
        y_min: y_min.max(0) as usize,
        x_max: x_max.min(w as i64 - 1) as usize,
        y_max: y_max.min(h as i64 - 1) as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bilinear_exact_on_integer_coordinates() {
        let grid =
            FeatureGrid::from_vec(2, 3, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(grid.sample(0.0, 0.0), vec![1.0]);
        assert_eq!(grid.sample(2.0, 0.0), vec![3.0]);
        assert_eq!(grid.sample(1.0, 1.0), vec![5.0]);
        assert_eq!(grid.sample(2.0, 1.0), vec![6.0]);
    }

    #[test]
    fn bilinear_midpoint_between_cells() {
        let mask = ProbMask::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert!((mask.sample(0.5, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_out_of_bounds_fill_is_zero() {
        let mask = ProbMask::from_vec(2, 2, vec![1.0; 4]).unwrap();
        assert_eq!(mask.sample(-3.0, -3.0), 0.0);
        assert_eq!(mask.sample(-0.001, 0.0), 0.0);
        assert_eq!(mask.sample(0.0, 1.001), 0.0);
    }

    #[test]
    fn softmax_single_element() {
        assert_eq!(stable_softmax(&[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn softmax_symmetric_pair() {
        let out = stable_softmax(&[3.7, 3.7]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!((out[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_large_inputs_do_not_overflow() {
        // softmax([1000, 1000.1]) = softmax([0, 0.1]); reference values from
        // the shift identity evaluated directly.
        let out = stable_softmax(&[1000.0, 1000.1]).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        let e = 0.1f64.exp();
        let expect = [1.0 / (1.0 + e), e / (1.0 + e)];
        assert!((out[0] - expect[0]).abs() < 1e-12);
        assert!((out[1] - expect[1]).abs() < 1e-12);
        assert!(out[1] > 0.5);
    }

    #[test]
    fn softmax_excluded_entries_are_exact_zeros() {
        let out = stable_softmax(&[1.0, f64::NEG_INFINITY, 1.0]).unwrap();
        assert_eq!(out[1], 0.0);
        assert!((out[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_all_excluded_errors() {
        let err = stable_softmax(&[f64::NEG_INFINITY; 3]).unwrap_err();
        assert!(matches!(err, Error::EmptyMatchingRegion(_)));
        assert!(stable_softmax(&[]).is_err());
    }

    #[test]
    fn clamp_box_examples() {
        assert_eq!(
            clamp_box((-1, 2, 9, 6), (10, 10)),
            BoundingBox::Rect { x_min: 0, y_min: 2, x_max: 9, y_max: 6 }
        );
        assert_eq!(
            clamp_box((2, 3, 4, 5), (10, 10)),
            BoundingBox::Rect { x_min: 2, y_min: 3, x_max: 4, y_max: 5 }
        );
        assert_eq!(clamp_box((5, 5, 2, 6), (10, 10)), BoundingBox::Empty);
        assert_eq!(clamp_box((12, 0, 15, 5), (10, 10)), BoundingBox::Empty);
    }

    #[test]
    fn downscale_majority_breaks_ties_low() {
        let mask = LabelMask::from_vec(2, 2, vec![1, 2, 2, 1]).unwrap();
        assert_eq!(mask.downscale_majority(2).unwrap().get(0, 0), 1);
    }

    #[test]
    fn flow_downscale_rescales_to_cell_units() {
        let mut flow = FlowField::zeros(4, 4);
        for y in 0..4 {
            for x in 0..4 {
                flow.set(y, x, 2.0, -4.0);
            }
        }
        let down = flow.downscale_mean(2).unwrap();
        assert_eq!(down.get(0, 0), (1.0, -2.0));
    }

    proptest! {
        #[test]
        fn prop_bilinear_exact_on_grid_points(
            h in 1usize..6, w in 1usize..6, c in 1usize..4,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..h * w * c).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let grid = FeatureGrid::from_vec(h, w, c, data).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let s = grid.sample(x as f64, y as f64);
                    for ch in 0..c {
                        prop_assert!((s[ch] - grid.cell(y, x)[ch]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn prop_softmax_shift_invariant(
            vals in proptest::collection::vec(-30.0f64..30.0, 1..12),
            shift in -100.0f64..100.0,
        ) {
            let a = stable_softmax(&vals).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let b = stable_softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let sum: f64 = a.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn prop_clamp_box_idempotent(
            x0 in -20i64..20, y0 in -20i64..20,
            x1 in -20i64..20, y1 in -20i64..20,
            h in 1usize..16, w in 1usize..16,
        ) {
            let once = clamp_box((x0, y0, x1, y1), (h, w));
            let again = match once {
                BoundingBox::Empty => BoundingBox::Empty,
                BoundingBox::Rect { x_min, y_min, x_max, y_max } => clamp_box(
                    (x_min as i64, y_min as i64, x_max as i64, y_max as i64),
                    (h, w),
                ),
            };
            prop_assert_eq!(once, again);
        }
    }
}

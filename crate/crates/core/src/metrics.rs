//! Segmentation quality: region similarity (intersection-over-union) and
//! contour accuracy (boundary precision/recall F-measure under a distance
//! tolerance, the usual benchmark simplification of bipartite contour
//! matching).

use crate::error::{Error, Result};
use crate::grid::LabelMask;

/// Per-frame and aggregate scores for one evaluation run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalResult {
    pub j_mean: f64,
    pub f_mean: f64,
    pub per_frame: Vec<(usize, f64, f64)>,
}

impl EvalResult {
    /// Aggregates per-frame `(frame_index, j, f)` rows; means are plain
    /// arithmetic means.
    pub fn from_frames(per_frame: Vec<(usize, f64, f64)>) -> Self {
        let n = per_frame.len().max(1) as f64;
        let j_mean = per_frame.iter().map(|&(_, j, _)| j).sum::<f64>() / n;
        let f_mean = per_frame.iter().map(|&(_, _, f)| f).sum::<f64>() / n;
        Self { j_mean, f_mean, per_frame }
    }
}

fn check_dims(estimate: &LabelMask, truth: &LabelMask) -> Result<()> {
    if estimate.height() != truth.height() || estimate.width() != truth.width() {
        return Err(Error::DimensionMismatch {
            context: "metric masks",
            left_h: estimate.height(),
            left_w: estimate.width(),
            right_h: truth.height(),
            right_w: truth.width(),
        });
    }
    Ok(())
}

/// Intersection-over-union of one object's binary masks. Both-empty scores
/// 1.0 so perfect absence tracking is perfect.
pub fn region_similarity(estimate: &LabelMask, truth: &LabelMask, object_id: u32) -> Result<f64> {
    check_dims(estimate, truth)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (e, t) in estimate.labels().iter().zip(truth.labels()) {
        let a = *e == object_id;
        let b = *t == object_id;
        if a && b {
            inter += 1;
        }
        if a || b {
            union += 1;
        }
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Boundary cells of one object's mask: foreground cells with at least one
/// 4-neighbor that is background or outside the frame.
pub fn boundary_cells(mask: &LabelMask, object_id: u32) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) != object_id {
                continue;
            }
            let edge = y == 0
                || x == 0
                || y == h - 1
                || x == w - 1
                || mask.get(y - 1, x) != object_id
                || mask.get(y + 1, x) != object_id
                || mask.get(y, x - 1) != object_id
                || mask.get(y, x + 1) != object_id;
            if edge {
                cells.push((y, x));
            }
        }
    }
    cells
}

fn fraction_within(from: &[(usize, usize)], to: &[(usize, usize)], tol2: f64) -> f64 {
    let mut hits = 0usize;
    for &(fy, fx) in from {
        let matched = to.iter().any(|&(ty, tx)| {
            let dy = fy as f64 - ty as f64;
            let dx = fx as f64 - tx as f64;
            dy * dy + dx * dx <= tol2
        });
        if matched {
            hits += 1;
        }
    }
    hits as f64 / from.len() as f64
}

/// Contour accuracy: harmonic mean of boundary precision and recall with
/// matches decided by Euclidean distance `<= tolerance_px`. Both boundaries
/// empty scores 1, exactly one empty scores 0.
pub fn contour_accuracy(
    estimate: &LabelMask,
    truth: &LabelMask,
    object_id: u32,
    tolerance_px: f64,
) -> Result<f64> {
    check_dims(estimate, truth)?;
    if tolerance_px < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "contour tolerance must be >= 0, got {tolerance_px}"
        )));
    }
    let est = boundary_cells(estimate, object_id);
    let tru = boundary_cells(truth, object_id);
    match (est.is_empty(), tru.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let tol2 = tolerance_px * tolerance_px;
    let precision = fraction_within(&est, &tru, tol2);
    let recall = fraction_within(&tru, &est, tol2);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Default contour tolerance: 0.8% of the mask diagonal, at least one pixel.
pub fn default_contour_tolerance(height: usize, width: usize) -> f64 {
    let diag = ((height * height + width * width) as f64).sqrt();
    (0.008 * diag).max(1.0)
}

//! Query-region prediction: backward flow warping of the previous mask plus
//! the two ablation baselines (dilated previous region, Gaussian around the
//! best-matched cell), and a block-matching flow estimator for when no
//! ground-truth or precomputed flow is available.

use crate::error::{Error, Result};
use crate::grid::{FeatureGrid, FlowField, ProbMask};

/// Which query-region predictor the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionPredictorKind {
    /// Warp the previous mask by optical flow.
    FlowBased,
    /// Square dilation of the previous mask by `radius` cells.
    PreviousRegion { radius: usize },
    /// Gaussian kernel of width `sigma` around the best-matched cell,
    /// thresholded at `cutoff`.
    BestMatchRegion { sigma: f64, cutoff: f64 },
}

impl RegionPredictorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionPredictorKind::FlowBased | RegionPredictorKind::PreviousRegion { .. } => Ok(()),
            RegionPredictorKind::BestMatchRegion { sigma, cutoff } => {
                if sigma <= 0.0 {
                    return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
                }
                if !(0.0 < cutoff && cutoff < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "cutoff must lie in (0, 1), got {cutoff}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegionPredictorKind::FlowBased => "flow_based",
            RegionPredictorKind::PreviousRegion { .. } => "previous_region",
            RegionPredictorKind::BestMatchRegion { .. } => "best_match_region",
        }
    }
}

/// Backward-warps the previous mask into the current frame.
///
/// `out(x, y) = prev(x - dx, y - dy)` with bilinear sampling and zero fill,
/// so objects that left the frame simply vanish instead of smearing.
pub fn warp_mask(prev_mask: &ProbMask, flow: &FlowField) -> Result<ProbMask> {
    if prev_mask.height() != flow.height() || prev_mask.width() != flow.width() {
        return Err(Error::DimensionMismatch {
            context: "warp_mask mask vs flow",
            left_h: prev_mask.height(),
            left_w: prev_mask.width(),
            right_h: flow.height(),
            right_w: flow.width(),
        });
    }
    let mut out = ProbMask::zeros(prev_mask.height(), prev_mask.width());
    for y in 0..out.height() {
        for x in 0..out.width() {
            let (dx, dy) = flow.get(y, x);
            let v = prev_mask.sample(x as f64 - dx, y as f64 - dy);
            out.set(y, x, v.clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Binary dilation of the binarized previous mask by a square structuring
/// element of half-width `radius`.
pub fn previous_region(prev_mask: &ProbMask, radius: usize) -> ProbMask {
    let (h, w) = (prev_mask.height(), prev_mask.width());
    let binary = prev_mask.binarize(0.5);
    let mut out = ProbMask::zeros(h, w);
    let r = radius as i64;
    for y in 0..h {
        for x in 0..w {
            if binary.get(y, x) < 0.5 {
                continue;
            }
            let y0 = (y as i64 - r).max(0) as usize;
            let y1 = ((y as i64 + r) as usize).min(h - 1);
            let x0 = (x as i64 - r).max(0) as usize;
            let x1 = ((x as i64 + r) as usize).min(w - 1);
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    out.set(yy, xx, 1.0);
                }
            }
        }
    }
    out
}

/// Binary disk from a 2D Gaussian centered on the best-matched cell:
/// 1 where `exp(-(d^2) / (2 sigma^2)) >= cutoff`.
pub fn best_match_region(
    similarity_argmax: (usize, usize),
    sigma: f64,
    cutoff: f64,
    dims: (usize, usize),
) -> Result<ProbMask> {
    let (cx, cy) = similarity_argmax;
    let (h, w) = dims;
    if cx >= w || cy >= h {
        return Err(Error::InvalidInput(format!(
            "best-match cell ({cx}, {cy}) outside {h}x{w} grid"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
    }
    let mut out = ProbMask::zeros(h, w);
    let denom = 2.0 * sigma * sigma;
    for y in 0..h {
        for x in 0..w {
            let d2 = (x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2);
            if (-d2 / denom).exp() >= cutoff {
                out.set(y, x, 1.0);
            }
        }
    }
    Ok(out)
}

/// Per-block integer flow by exhaustive SAD search within `±search`.
///
/// The result uses the same convention as [`warp_mask`]: the stored vector
/// is the forward motion of the block content, so warping samples the
/// previous frame at `(x - dx, y - dy)`. Ties are broken toward the smallest
/// displacement magnitude, then smallest dx, then smallest dy, which keeps
/// flat regions at zero and runs deterministic.
pub fn estimate_flow_blockmatch(
    prev_frame: &FeatureGrid,
    cur_frame: &FeatureGrid,
    block: usize,
    search: usize,
) -> Result<FlowField> {
    if prev_frame.height() != cur_frame.height()
        || prev_frame.width() != cur_frame.width()
        || prev_frame.channels() != cur_frame.channels()
    {
        return Err(Error::DimensionMismatch {
            context: "block match frames",
            left_h: prev_frame.height(),
            left_w: prev_frame.width(),
            right_h: cur_frame.height(),
            right_w: cur_frame.width(),
        });
    }
    if block == 0 || search == 0 {
        return Err(Error::InvalidConfig("block and search must be >= 1".into()));
    }
    let (h, w) = (cur_frame.height(), cur_frame.width());
    let mut flow = FlowField::zeros(h, w);
    let s = search as i64;

    let mut by = 0;
    while by < h {
        let bh = block.min(h - by);
        let mut bx = 0;
        while bx < w {
            let bw = block.min(w - bx);
            let mut best: Option<(f64, i64, i64, i64)> = None; // (sad, mag2, dx, dy)
            for dy in -s..=s {
                for dx in -s..=s {
                    // candidate source block in the previous frame
                    let sy = by as i64 - dy;
                    let sx = bx as i64 - dx;
                    if sy < 0 || sx < 0 || sy + bh as i64 > h as i64 || sx + bw as i64 > w as i64 {
                        continue;
                    }
                    let sad = block_sad(cur_frame, prev_frame, by, bx, sy as usize, sx as usize, bh, bw);
                    let mag2 = dx * dx + dy * dy;
                    let better = match &best {
                        None => true,
                        Some(&(bsad, bmag2, bdx, bdy)) => {
                            (sad, mag2, dx, dy) < (bsad, bmag2, bdx, bdy)
                        }
                    };
                    if better {
                        best = Some((sad, mag2, dx, dy));
                    }
                }
            }
            let (dx, dy) = best.map(|(_, _, dx, dy)| (dx as f64, dy as f64)).unwrap_or((0.0, 0.0));
            for y in by..by + bh {
                for x in bx..bx + bw {
                    flow.set(y, x, dx, dy);
                }
            }
            bx += block;
        }
        by += block;
    }
    Ok(flow)
}

#[inline]
fn block_sad(
    cur: &FeatureGrid,
    prev: &FeatureGrid,
    cy: usize,
    cx: usize,
    py: usize,
    px: usize,
    bh: usize,
    bw: usize,
) -> f64 {
    let mut sad = 0.0;
    for y in 0..bh {
        for x in 0..bw {
            let a = cur.cell(cy + y, cx + x);
            let b = prev.cell(py + y, px + x);
            for ch in 0..cur.channels() {
                sad += (a[ch] - b[ch]).abs();
            }
        }
    }
    sad
}

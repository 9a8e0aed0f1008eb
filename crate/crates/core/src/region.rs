//! Mask-to-attention conversion: padded bounding boxes around objects, an
//! all-zero map when an object has disappeared from a memory frame, and the
//! whole-frame fallback that re-acquires occluded objects on the query side.

use crate::error::Result;
use crate::grid::{clamp_box, AttentionMap, BoundingBox, LabelMask, ProbMask};

/// Region parameters: box padding `phi` and the fallback pixel-count
/// threshold `eta`, both in feature-scale cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RegionConfig {
    pub phi: usize,
    pub eta: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { phi: 4, eta: 10 }
    }
}

/// How a query attention map was determined; used for per-frame logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRegionKind {
    /// Tracked foreground fell below `eta`: match against the whole frame.
    FullFallback,
    /// Padded box around the tracked foreground.
    Box,
}

/// Padded bounding box of one object's support, clamped to the grid;
/// `Empty` when the object is absent.
pub fn object_box(mask: &LabelMask, object_id: u32, phi: usize) -> BoundingBox {
    let mut x_min = i64::MAX;
    let mut x_max = i64::MIN;
    let mut y_min = i64::MAX;
    let mut y_max = i64::MIN;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(y, x) == object_id {
                x_min = x_min.min(x as i64);
                x_max = x_max.max(x as i64);
                y_min = y_min.min(y as i64);
                y_max = y_max.max(y as i64);
            }
        }
    }
    if x_min == i64::MAX {
        return BoundingBox::Empty;
    }
    let p = phi as i64;
    clamp_box((x_min - p, y_min - p, x_max + p, y_max + p), (mask.height(), mask.width()))
}

fn box_attention(b: BoundingBox, height: usize, width: usize) -> AttentionMap {
    let mut map = AttentionMap::zeros(height, width);
    if let BoundingBox::Rect { x_min, y_min, x_max, y_max } = b {
        for y in y_min..=y_max {
            for x in x_min..=x_max {
                map.set(y, x, true);
            }
        }
    }
    map
}

/// Memory-side attention: ones inside the padded object box, zeros outside.
/// An absent object yields the all-zero map, which removes the frame from
/// the matching region entirely.
pub fn memory_attention(mask: &LabelMask, object_id: u32, config: &RegionConfig) -> AttentionMap {
    box_attention(object_box(mask, object_id, config.phi), mask.height(), mask.width())
}

/// Query-side attention from a tracked (warped) mask, with kind for logging.
///
/// The mask is binarized at `binarize_threshold`; when fewer than `eta`
/// cells survive, matching expands to the whole frame so a disappeared
/// object can be re-acquired anywhere.
pub fn query_attention_with_kind(
    warped: &ProbMask,
    config: &RegionConfig,
    binarize_threshold: f64,
) -> Result<(AttentionMap, QueryRegionKind)> {
    if !(0.0 < binarize_threshold && binarize_threshold < 1.0) {
        return Err(crate::error::Error::InvalidConfig(format!(
            "binarize threshold must lie in (0, 1), got {binarize_threshold}"
        )));
    }
    let binary = warped.binarize(binarize_threshold);
    let count = binary.count_above(0.5);
    if count < config.eta {
        return Ok((
            AttentionMap::ones(warped.height(), warped.width()),
            QueryRegionKind::FullFallback,
        ));
    }
    let labels = binary.values().iter().map(|&v| if v >= 0.5 { 1u32 } else { 0 }).collect();
    let as_mask = LabelMask::from_vec(warped.height(), warped.width(), labels)?;
    Ok((memory_attention(&as_mask, 1, config), QueryRegionKind::Box))
}

/// [`query_attention_with_kind`] without the log tag.
pub fn query_attention(
    warped: &ProbMask,
    config: &RegionConfig,
    binarize_threshold: f64,
) -> Result<AttentionMap> {
    query_attention_with_kind(warped, config, binarize_threshold).map(|(map, _)| map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_with_cells(h: usize, w: usize, cells: &[(usize, usize)], id: u32) -> LabelMask {
        let mut m = LabelMask::zeros(h, w);
        for &(x, y) in cells {
            m.set(y, x, id);
        }
        m
    }

    #[test]
    fn object_box_min_max_over_support() {
        let m = mask_with_cells(10, 10, &[(3, 4), (5, 6)], 1);
        assert_eq!(
            object_box(&m, 1, 0),
            BoundingBox::Rect { x_min: 3, y_min: 4, x_max: 5, y_max: 6 }
        );
        assert_eq!(
            object_box(&m, 1, 4),
            BoundingBox::Rect { x_min: 0, y_min: 0, x_max: 9, y_max: 9 }
        );
    }

    #[test]
    fn object_box_absent_is_empty() {
        let m = mask_with_cells(10, 10, &[(3, 4)], 1);
        assert_eq!(object_box(&m, 2, 4), BoundingBox::Empty);
    }

    #[test]
    fn memory_attention_full_frame_object() {
        let mut m = LabelMask::zeros(6, 6);
        for y in 0..6 {
            for x in 0..6 {
                m.set(y, x, 1);
            }
        }
        let a = memory_attention(&m, 1, &RegionConfig::default());
        assert!(a.is_all_on());
    }

    #[test]
    fn memory_attention_absent_object_is_all_zeros() {
        let m = LabelMask::zeros(6, 6);
        let a = memory_attention(&m, 1, &RegionConfig::default());
        assert!(a.is_all_off());
    }

    #[test]
    fn memory_attention_single_cell_padded_box() {
        let m = mask_with_cells(20, 20, &[(5, 5)], 1);
        let a = memory_attention(&m, 1, &RegionConfig { phi: 4, eta: 10 });
        for y in 0..20 {
            for x in 0..20 {
                let inside = (1..=9).contains(&x) && (1..=9).contains(&y);
                assert_eq!(a.get(y, x), inside, "cell ({x},{y})");
            }
        }
    }

    #[test]
    fn query_attention_fallback_below_eta() {
        let mut warped = ProbMask::zeros(12, 12);
        for x in 0..3 {
            warped.set(5, 4 + x, 1.0);
        }
        let cfg = RegionConfig { phi: 4, eta: 10 };
        let (map, kind) = query_attention_with_kind(&warped, &cfg, 0.5).unwrap();
        assert_eq!(kind, QueryRegionKind::FullFallback);
        assert!(map.is_all_on());
    }

    #[test]
    fn query_attention_box_above_eta() {
        // 50 foreground cells in a blob; oracle = count then padded box.
        let mut warped = ProbMask::zeros(20, 20);
        for y in 8..13 {
            for x in 6..16 {
                warped.set(y, x, 0.9);
            }
        }
        let cfg = RegionConfig { phi: 2, eta: 10 };
        let (map, kind) = query_attention_with_kind(&warped, &cfg, 0.5).unwrap();
        assert_eq!(kind, QueryRegionKind::Box);
        let count = warped.binarize(0.5).count_above(0.5);
        assert_eq!(count, 50);
        assert!(count >= cfg.eta);
        for y in 0..20 {
            for x in 0..20 {
                let inside = (4..=17).contains(&x) && (6..=14).contains(&y);
                assert_eq!(map.get(y, x), inside, "cell ({x},{y})");
            }
        }
    }

    #[test]
    fn query_attention_all_zero_mask_falls_back() {
        let warped = ProbMask::zeros(8, 8);
        let (map, kind) =
            query_attention_with_kind(&warped, &RegionConfig::default(), 0.5).unwrap();
        assert_eq!(kind, QueryRegionKind::FullFallback);
        assert!(map.is_all_on());
    }

    proptest! {
        #[test]
        fn prop_attention_monotone_in_phi(
            h in 4usize..12, w in 4usize..12,
            cells in proptest::collection::vec((0usize..12, 0usize..12), 1..8),
            phi1 in 0usize..4, extra in 0usize..4,
        ) {
            let cells: Vec<(usize, usize)> =
                cells.into_iter().map(|(x, y)| (x % w, y % h)).collect();
            let m = mask_with_cells(h, w, &cells, 1);
            let small = memory_attention(&m, 1, &RegionConfig { phi: phi1, eta: 10 });
            let large = memory_attention(&m, 1, &RegionConfig { phi: phi1 + extra, eta: 10 });
            for y in 0..h {
                for x in 0..w {
                    prop_assert!(!small.get(y, x) || large.get(y, x));
                    // the 1-region covers the object support
                    if m.get(y, x) == 1 {
                        prop_assert!(small.get(y, x));
                    }
                }
            }
        }

        #[test]
        fn prop_query_fallback_iff_count_below_eta(
            h in 3usize..7, w in 3usize..7,
            bits in proptest::collection::vec(any::<bool>(), 9..49),
            eta in 0usize..20,
        ) {
            let mut warped = ProbMask::zeros(h, w);
            let mut count = 0usize;
            for y in 0..h {
                for x in 0..w {
                    if bits[(y * w + x) % bits.len()] {
                        warped.set(y, x, 1.0);
                        count += 1;
                    }
                }
            }
            let cfg = RegionConfig { phi: 1, eta };
            let (map, kind) = query_attention_with_kind(&warped, &cfg, 0.5).unwrap();
            if count < eta {
                prop_assert_eq!(kind, QueryRegionKind::FullFallback);
                prop_assert!(map.is_all_on());
            } else {
                prop_assert_eq!(kind, QueryRegionKind::Box);
            }
        }

        #[test]
        fn prop_attention_is_rect_full_or_empty(
            h in 3usize..9, w in 3usize..9,
            cells in proptest::collection::vec((0usize..9, 0usize..9), 0..6),
            phi in 0usize..3,
        ) {
            let cells: Vec<(usize, usize)> =
                cells.into_iter().map(|(x, y)| (x % w, y % h)).collect();
            let m = mask_with_cells(h, w, &cells, 1);
            let a = memory_attention(&m, 1, &RegionConfig { phi, eta: 10 });
            // active cells must form an axis-aligned rectangle (or nothing)
            let active = a.active_indices();
            if !active.is_empty() {
                let xs: Vec<usize> = active.iter().map(|i| i % w).collect();
                let ys: Vec<usize> = active.iter().map(|i| i / w).collect();
                let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
                let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
                prop_assert_eq!(active.len(), (x1 - x0 + 1) * (y1 - y0 + 1));
            }
        }
    }
}

//! Space-time memory reading.
//!
//! Two kernels share one contract: `read_global` matches every query cell
//! against every memory position, `read_regional` restricts both sides to
//! the active cells of their attention maps and normalizes the softmax over
//! the memory region only. The regional kernel materializes the regions as
//! index lists up front and loops over those, which is what actually buys
//! the complexity reduction — it never touches a full similarity matrix.
//!
//! Both kernels report their cost through the same exact FLOP model so that
//! measured ratios are pure arithmetic, independent of wall-clock noise.

use crate::error::{Error, Result};
use crate::grid::{AttentionMap, FeatureGrid};

/// Time-stacked memory embedding of one object: per-frame keys, values and
/// attention maps sharing a single spatial size.
#[derive(Debug, Clone)]
pub struct MemoryEmbedding {
    keys: Vec<FeatureGrid>,
    values: Vec<FeatureGrid>,
    attentions: Vec<AttentionMap>,
}

impl MemoryEmbedding {
    pub fn new(
        keys: Vec<FeatureGrid>,
        values: Vec<FeatureGrid>,
        attentions: Vec<AttentionMap>,
    ) -> Result<Self> {
        if keys.is_empty() || keys.len() != values.len() || keys.len() != attentions.len() {
            return Err(Error::InvalidInput(format!(
                "memory embedding needs equal, non-zero frame counts (keys {}, values {}, attentions {})",
                keys.len(),
                values.len(),
                attentions.len()
            )));
        }
        let (h, w) = (keys[0].height(), keys[0].width());
        let kc = keys[0].channels();
        let vc = values[0].channels();
        for t in 0..keys.len() {
            let same = keys[t].height() == h
                && keys[t].width() == w
                && keys[t].channels() == kc
                && values[t].height() == h
                && values[t].width() == w
                && values[t].channels() == vc
                && attentions[t].height() == h
                && attentions[t].width() == w;
            if !same {
                return Err(Error::InvalidInput(format!(
                    "memory embedding frame {t} does not match frame 0 dimensions"
                )));
            }
        }
        Ok(Self { keys, values, attentions })
    }

    pub fn frames(&self) -> usize {
        self.keys.len()
    }

    pub fn height(&self) -> usize {
        self.keys[0].height()
    }

    pub fn width(&self) -> usize {
        self.keys[0].width()
    }

    pub fn key_channels(&self) -> usize {
        self.keys[0].channels()
    }

    pub fn value_channels(&self) -> usize {
        self.values[0].channels()
    }

    pub fn keys(&self) -> &[FeatureGrid] {
        &self.keys
    }

    pub fn values(&self) -> &[FeatureGrid] {
        &self.values
    }

    pub fn attentions(&self) -> &[AttentionMap] {
        &self.attentions
    }
}

/// Query-frame embedding: key, value and the query attention map.
#[derive(Debug, Clone)]
pub struct QueryEmbedding {
    pub key: FeatureGrid,
    pub value: FeatureGrid,
    pub attention: AttentionMap,
}

impl QueryEmbedding {
    fn check_compatible(&self, mem: &MemoryEmbedding) -> Result<()> {
        let ok = self.key.height() == mem.height()
            && self.key.width() == mem.width()
            && self.key.channels() == mem.key_channels()
            && self.value.height() == mem.height()
            && self.value.width() == mem.width()
            && self.value.channels() == mem.value_channels()
            && self.attention.height() == mem.height()
            && self.attention.width() == mem.width();
        if !ok {
            return Err(Error::DimensionMismatch {
                context: "query embedding vs memory embedding",
                left_h: self.key.height(),
                left_w: self.key.width(),
                right_h: mem.height(),
                right_w: mem.width(),
            });
        }
        Ok(())
    }
}

/// Result of a read: the concatenated `[query value, retrieved value]` grid,
/// which query cells were actually read, the exact modeled FLOP count, and
/// whether some covered query cell faced an empty memory region.
#[derive(Debug, Clone)]
pub struct ReaderOutput {
    pub grid: FeatureGrid,
    pub coverage: AttentionMap,
    pub flop_count: u64,
    pub empty_memory: bool,
}

/// Per-query-cell best-matching memory position `(t, y, x)`; `None` where no
/// read occurred. Row-major over query cells.
#[derive(Debug, Clone)]
pub struct MatchTrace {
    pub argmax: Vec<Option<(usize, usize, usize)>>,
}

/// Raw pairwise similarity `exp(key_m . key_q)`.
///
/// Readers evaluate this in the log domain so the softmax can subtract the
/// maximum before exponentiating; the raw form is exposed for inspection.
pub fn similarity(key_m: &[f64], key_q: &[f64]) -> Result<f64> {
    Ok(dot(key_m, key_q)?.exp())
}

fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            context: "similarity key vectors",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Exact FLOP model for one read: similarity dots (2 per multiply-add),
/// exp + normalization charged at 3 ops per pair, and the weighted value
/// sum (2 per multiply-add), all over `|R_M| x |R_Q|` pairs.
pub fn flop_model(key_channels: usize, value_channels: usize, mem_cells: u64, query_cells: u64) -> u64 {
    (2 * key_channels as u64 + 3 + 2 * value_channels as u64) * mem_cells * query_cells
}

/// `(|R_M|, |R_Q|)` for the unrestricted reader: full domains.
pub fn full_region_sizes(frames: usize, height: usize, width: usize) -> (u64, u64) {
    let hw = (height * width) as u64;
    (frames as u64 * hw, hw)
}

/// Global space-time read: every query cell attends over all `T*H*W`
/// memory positions; attention maps are ignored.
pub fn read_global(mem: &MemoryEmbedding, query: &QueryEmbedding) -> Result<ReaderOutput> {
    read_impl(mem, query, false, None)
}

/// [`read_global`] plus the per-cell argmax memory position.
pub fn read_global_traced(
    mem: &MemoryEmbedding,
    query: &QueryEmbedding,
) -> Result<(ReaderOutput, MatchTrace)> {
    let mut trace = MatchTrace { argmax: Vec::new() };
    let out = read_impl(mem, query, false, Some(&mut trace))?;
    Ok((out, trace))
}

/// Regional read: matching restricted to the active cells of the memory and
/// query attention maps, with softmax normalization over the memory region
/// only. Query cells outside the region get zero output and zero coverage;
/// if the memory region is empty while the query region is not, retrieval
/// is zero everywhere and `empty_memory` is raised.
pub fn read_regional(mem: &MemoryEmbedding, query: &QueryEmbedding) -> Result<ReaderOutput> {
    read_impl(mem, query, true, None)
}

/// [`read_regional`] plus the per-cell argmax memory position.
pub fn read_regional_traced(
    mem: &MemoryEmbedding,
    query: &QueryEmbedding,
) -> Result<(ReaderOutput, MatchTrace)> {
    let mut trace = MatchTrace { argmax: Vec::new() };
    let out = read_impl(mem, query, true, Some(&mut trace))?;
    Ok((out, trace))
}

fn read_impl(
    mem: &MemoryEmbedding,
    query: &QueryEmbedding,
    regional: bool,
    mut trace: Option<&mut MatchTrace>,
) -> Result<ReaderOutput> {
    query.check_compatible(mem)?;
    let (h, w) = (mem.height(), mem.width());
    let kc = mem.key_channels();
    let vc = mem.value_channels();

    // Materialize the regions once; the kernel loops never touch cells
    // outside them.
    let mem_cells: Vec<(usize, usize)> = if regional {
        let mut cells = Vec::new();
        for (t, att) in mem.attentions().iter().enumerate() {
            for idx in att.active_indices() {
                cells.push((t, idx));
            }
        }
        cells
    } else {
        (0..mem.frames()).flat_map(|t| (0..h * w).map(move |i| (t, i))).collect()
    };
    let query_cells: Vec<usize> =
        if regional { query.attention.active_indices() } else { (0..h * w).collect() };

    let r_m = mem_cells.len() as u64;
    let r_q = query_cells.len() as u64;
    let flop_count = flop_model(kc, vc, r_m, r_q);

    let mut grid = FeatureGrid::zeros(h, w, 2 * vc);
    let mut coverage = AttentionMap::zeros(h, w);
    let mut empty_memory = false;
    if let Some(t) = trace.as_deref_mut() {
        t.argmax = vec![None; h * w];
    }

    // Query value goes into the first half for covered cells.
    for &qi in &query_cells {
        let (qy, qx) = (qi / w, qi % w);
        let qv = query.value.cell(qy, qx);
        grid.cell_mut(qy, qx)[..vc].copy_from_slice(qv);
    }

    if mem_cells.is_empty() {
        // No memory region: zero retrieval, flagged, nothing covered.
        empty_memory = !query_cells.is_empty();
        return Ok(ReaderOutput { grid, coverage, flop_count, empty_memory });
    }

    let mut logits = vec![0.0f64; mem_cells.len()];
    for &qi in &query_cells {
        let (qy, qx) = (qi / w, qi % w);
        let qk = query.key.cell(qy, qx);

        let mut max_logit = f64::NEG_INFINITY;
        let mut best = 0usize;
        for (j, &(t, mi)) in mem_cells.iter().enumerate() {
            let (my, mx) = (mi / w, mi % w);
            let mk = mem.keys()[t].cell(my, mx);
            let mut d = 0.0;
            for ch in 0..kc {
                d += mk[ch] * qk[ch];
            }
            logits[j] = d;
            if d > max_logit {
                max_logit = d;
                best = j;
            }
        }

        let mut denom = 0.0;
        for logit in logits.iter_mut() {
            *logit = (*logit - max_logit).exp();
            denom += *logit;
        }

        let out_cell = grid.cell_mut(qy, qx);
        for (j, &(t, mi)) in mem_cells.iter().enumerate() {
            let (my, mx) = (mi / w, mi % w);
            let weight = logits[j] / denom;
            let mv = mem.values()[t].cell(my, mx);
            for ch in 0..vc {
                out_cell[vc + ch] += weight * mv[ch];
            }
        }

        coverage.set(qy, qx, true);
        if let Some(tr) = trace.as_deref_mut() {
            let (t, mi) = mem_cells[best];
            tr.argmax[qi] = Some((t, mi / w, mi % w));
        }
    }

    Ok(ReaderOutput { grid, coverage, flop_count, empty_memory })
}

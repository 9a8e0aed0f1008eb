//! Deterministic, training-free encoders standing in for the learned
//! memory/query networks.
//!
//! Each `cell x cell` block of the RGB frame becomes one feature cell with a
//! 12-number descriptor (per-channel mean, standard deviation, and mean
//! absolute horizontal/vertical gradient), projected through fixed seeded
//! random matrices. The memory value reserves its last channel for the mean
//! mask probability of the cell, so attention retrieval literally transfers
//! labels from memory to query cells — no trained decoder needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::grid::{AttentionMap, FeatureGrid, ProbMask};
use crate::reader::{QueryEmbedding, ReaderOutput};

const DESCRIPTOR_LEN: usize = 12;
// Keys are L2-normalized then scaled; exp(dot) then spans a range wide
// enough for the softmax to act nearly hard on distinct textures.
const KEY_GAIN: f64 = 8.0;

/// Encoder parameters. `cell` is the frame-to-feature downscale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StubEncoderConfig {
    pub cell: usize,
    pub key_channels: usize,
    pub value_channels: usize,
    pub seed: u64,
}

impl Default for StubEncoderConfig {
    fn default() -> Self {
        Self { cell: 4, key_channels: 16, value_channels: 32, seed: 0x5eed }
    }
}

impl StubEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 {
            return Err(Error::InvalidConfig("encoder cell must be >= 1".into()));
        }
        if self.key_channels == 0 {
            return Err(Error::InvalidConfig("key_channels must be >= 1".into()));
        }
        if self.value_channels < 2 {
            return Err(Error::InvalidConfig(
                "value_channels must be >= 2 (one channel is reserved for the label)".into(),
            ));
        }
        Ok(())
    }

    fn feature_dims(&self, frame: &FeatureGrid) -> Result<(usize, usize)> {
        if frame.channels() != 3 {
            return Err(Error::InvalidInput(format!(
                "encoder expects RGB frames (3 channels), got {}",
                frame.channels()
            )));
        }
        if frame.height() % self.cell != 0 || frame.width() % self.cell != 0 {
            return Err(Error::InvalidInput(format!(
                "frame dims {}x{} not divisible by cell {}",
                frame.height(),
                frame.width(),
                self.cell
            )));
        }
        Ok((frame.height() / self.cell, frame.width() / self.cell))
    }
}

/// Fixed random projection; row-major `out_dim x DESCRIPTOR_LEN`.
fn projection(seed: u64, stream: u64, out_dim: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let scale = 1.0 / (DESCRIPTOR_LEN as f64).sqrt();
    (0..out_dim * DESCRIPTOR_LEN).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
}

fn cell_descriptor(frame: &FeatureGrid, cy: usize, cx: usize, cell: usize) -> [f64; DESCRIPTOR_LEN] {
    let mut mean = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut gx = [0.0f64; 3];
    let mut gy = [0.0f64; 3];
    let n = (cell * cell) as f64;
    for dy in 0..cell {
        for dx in 0..cell {
            let px = frame.cell(cy * cell + dy, cx * cell + dx);
            for ch in 0..3 {
                mean[ch] += px[ch];
                sq[ch] += px[ch] * px[ch];
            }
            // gradients stay within the cell so whole-cell translations map
            // descriptors cell-for-cell
            if dx + 1 < cell {
                let right = frame.cell(cy * cell + dy, cx * cell + dx + 1);
                for ch in 0..3 {
                    gx[ch] += (right[ch] - px[ch]).abs();
                }
            }
            if dy + 1 < cell {
                let down = frame.cell(cy * cell + dy + 1, cx * cell + dx);
                for ch in 0..3 {
                    gy[ch] += (down[ch] - px[ch]).abs();
                }
            }
        }
    }
    let pairs = (cell * (cell.saturating_sub(1))) as f64;
    let mut d = [0.0f64; DESCRIPTOR_LEN];
    for ch in 0..3 {
        let m = mean[ch] / n;
        d[ch] = m;
        d[3 + ch] = (sq[ch] / n - m * m).max(0.0).sqrt();
        d[6 + ch] = if pairs > 0.0 { gx[ch] / pairs } else { 0.0 };
        d[9 + ch] = if pairs > 0.0 { gy[ch] / pairs } else { 0.0 };
    }
    d
}

fn project(desc: &[f64; DESCRIPTOR_LEN], matrix: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(matrix.chunks_exact(DESCRIPTOR_LEN)) {
        *o = row.iter().zip(desc.iter()).map(|(a, b)| a * b).sum();
    }
}

fn normalize_key(key: &mut [f64]) {
    let norm: f64 = key.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for v in key.iter_mut() {
            *v *= KEY_GAIN / norm;
        }
    }
}

fn encode_grids(
    frame: &FeatureGrid,
    mask: Option<&ProbMask>,
    config: &StubEncoderConfig,
) -> Result<(FeatureGrid, FeatureGrid)> {
    config.validate()?;
    let (fh, fw) = config.feature_dims(frame)?;
    if let Some(m) = mask {
        if m.height() != frame.height() || m.width() != frame.width() {
            return Err(Error::DimensionMismatch {
                context: "encoder mask vs frame",
                left_h: m.height(),
                left_w: m.width(),
                right_h: frame.height(),
                right_w: frame.width(),
            });
        }
    }
    let key_proj = projection(config.seed, 1, config.key_channels);
    let value_proj = projection(config.seed, 2, config.value_channels - 1);

    let mut key = FeatureGrid::zeros(fh, fw, config.key_channels);
    let mut value = FeatureGrid::zeros(fh, fw, config.value_channels);
    for cy in 0..fh {
        for cx in 0..fw {
            let desc = cell_descriptor(frame, cy, cx, config.cell);
            let kc = key.cell_mut(cy, cx);
            project(&desc, &key_proj, kc);
            normalize_key(kc);
            let vc = value.cell_mut(cy, cx);
            project(&desc, &value_proj, &mut vc[..config.value_channels - 1]);
            if let Some(m) = mask {
                let mut sum = 0.0;
                for dy in 0..config.cell {
                    for dx in 0..config.cell {
                        sum += m.get(cy * config.cell + dy, cx * config.cell + dx);
                    }
                }
                vc[config.value_channels - 1] = sum / (config.cell * config.cell) as f64;
            }
        }
    }
    Ok((key, value))
}

/// Encodes an RGB frame into a query embedding. The attention map starts
/// all-ones; the pipeline replaces it per object.
pub fn encode_query(frame: &FeatureGrid, config: &StubEncoderConfig) -> Result<QueryEmbedding> {
    let (key, value) = encode_grids(frame, None, config)?;
    let (h, w) = (key.height(), key.width());
    Ok(QueryEmbedding { key, value, attention: AttentionMap::ones(h, w) })
}

/// Encodes an RGB frame plus an object probability mask (at frame scale)
/// into memory key/value grids. The value's last channel carries the
/// per-cell mean mask probability.
pub fn encode_memory(
    frame: &FeatureGrid,
    mask: &ProbMask,
    config: &StubEncoderConfig,
) -> Result<(FeatureGrid, FeatureGrid)> {
    encode_grids(frame, Some(mask), config)
}

/// Reads the retrieved label channel back out of a reader output as an
/// object probability mask. Uncovered cells are 0.
pub fn decode_label(output: &ReaderOutput) -> ProbMask {
    let grid = &output.grid;
    let label_ch = grid.channels() - 1;
    let mut mask = ProbMask::zeros(grid.height(), grid.width());
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if output.coverage.get(y, x) {
                mask.set(y, x, grid.cell(y, x)[label_ch].clamp(0.0, 1.0));
            }
        }
    }
    mask
}

//! Local-to-local memory reading for video object segmentation.
//!
//! The crate implements the full inference-side machinery around a regional
//! memory reader: dense grid primitives, mask-to-attention conversion with a
//! disappearance fallback, flow-based mask tracking, the global and regional
//! space-time readers with exact FLOP accounting, per-object memory banks,
//! a deterministic training-free feature encoder, segmentation metrics, a
//! synthetic sequence generator that doubles as a test oracle, and the
//! pipeline/benchmark drivers behind the `rmreader` CLI.

pub mod bank;
pub mod encoder;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod reader;
pub mod region;
pub mod synth;
pub mod tracking;

pub use bank::{BankEntry, MemoryBank, MemoryPolicy};
pub use encoder::{decode_label, encode_memory, encode_query, StubEncoderConfig};
pub use error::{Error, Result};
pub use grid::{
    bilinear_sample, clamp_box, stable_softmax, AttentionMap, BoundingBox, FeatureGrid, FlowField,
    LabelMask, ProbMask,
};
pub use metrics::{contour_accuracy, region_similarity, EvalResult};
pub use pipeline::{
    ablate_regions, bench_readers, run_pipeline, BenchReport, FlowSource, PipelineConfig,
    ReaderKind,
};
pub use reader::{
    flop_model, read_global, read_regional, similarity, MemoryEmbedding, QueryEmbedding,
    ReaderOutput,
};
pub use region::{memory_attention, object_box, query_attention, RegionConfig};
pub use synth::{RegionAreaSampler, SpritePose, SpriteSpec, SyntheticSequence};
pub use tracking::{
    best_match_region, estimate_flow_blockmatch, previous_region, warp_mask, RegionPredictorKind,
};

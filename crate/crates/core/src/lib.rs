//! Training-free template matching of object proposals against multi-view
//! embedding banks.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: pooling and similarity kernels, the score pipeline
//! (absolute, relative, joint, prior-weighted final), COCO-style AP
//! evaluation, RLE masks and a deterministic synthetic world generator.
//! File formats, the CLI and parallel batch runs live in the `ztm` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod config;
pub mod error;
pub mod evaluation;
pub mod rle;
pub mod scoring;
pub mod similarity;
pub mod synthbench;
pub mod types;
pub mod validate;

pub use config::{default_config, Metric, ScoringConfig};
pub use error::{Error, Result};
pub use evaluation::{evaluate, EvalMode, EvalParams, EvalReport, GroundTruth, GroundTruthSet};
pub use rle::Rle;
pub use scoring::{match_prepared, match_proposals, AggregationSpec, MatchOutput, ScoreTensor, Stage};
pub use similarity::{Pooling, PoolingKind, PreparedBank};
pub use types::{
    BBox, ClassTemplates, Detection, EmbeddingVector, PatchRepr, PatchTokenMatrix, Proposal, TemplateBank, TemplateView,
};
pub use validate::{validate_bank, validate_proposal, Violation};

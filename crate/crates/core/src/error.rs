use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the scoring core. All of them describe bad input data or
/// bad configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class `{0}` has no template views")]
    EmptyViews(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("invalid proposal `{id}`: {reason}")]
    InvalidProposal { id: String, reason: String },

    #[error("invalid template bank: {0}")]
    InvalidBank(String),

    #[error("proposal `{proposal_id}` vs class `{class_id}`: {source}")]
    Scoring {
        proposal_id: String,
        class_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown image `{0}`")]
    UnknownImage(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("mask canvas mismatch: {0}x{1} vs {2}x{3}")]
    CanvasMismatch(u32, u32, u32, u32),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid world spec: {0}")]
    InvalidWorld(String),
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the descriptor and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image has zero total intensity")]
    ZeroMass,
    #[error("no pixel exceeds the foreground threshold {0}")]
    EmptyImage(f64),
    #[error("invalid Zernike index (n={n}, m={m})")]
    InvalidIndex { n: i64, m: i64 },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("FMT normalizer coefficient {0} is zero")]
    DegenerateNormalizer(&'static str),
    #[error("all pixels fall into a single histogram bin")]
    DegenerateHistogram,
    #[error("structuring element has no active cell")]
    EmptyStructuringElement,
    #[error("invalid condition index {0} (expected 1..=6)")]
    InvalidCondition(usize),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("no item passes confidence threshold {0}")]
    ZeroSelected(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rank {k} out of range 1..={len}")]
    RankOutOfRange { k: usize, len: usize },
    #[error("class has fewer than two examples")]
    DegenerateClass,
    #[error("only one class present")]
    SingleClass,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors produced by state construction, operator algebra and the
/// higher-level evaluators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("duplicate mode `{0}`")]
    DuplicateMode(String),

    #[error("mode `{0}` must have cutoff >= 1")]
    InvalidCutoff(String),

    #[error(
        "cutoff {given} too small for alpha = {alpha}: minimal admissible cutoff is {required}"
    )]
    CutoffTooSmall {
        alpha: f64,
        given: usize,
        required: usize,
    },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("matrix shape {rows}x{cols} does not match layout dimension {dim}")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },

    #[error("beamsplitter modes must share a cutoff ({0} vs {1})")]
    UnequalCutoffs(usize, usize),

    #[error("state amplitudes violate |q|^2 + |r|^2 = 1 (got {0})")]
    NotNormalized(f64),

    #[error("denominator below 1e-14 in intensity correlator (need alpha > 0)")]
    ZeroDenominator,

    #[error("empty search space")]
    EmptySearchSpace,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

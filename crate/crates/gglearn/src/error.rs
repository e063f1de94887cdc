use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("column length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("singular submatrix in determinant-based formula")]
    SingularSubmatrix,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codebook target unreachable: achieved {achieved} of {target} words")]
    TargetUnreachable { achieved: usize, target: usize },

    #[error("m* search exhausted: no success up to m = {limit}")]
    SearchExhausted { limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the configured maximum {max}")]
    SizeLimit { dim: usize, max: usize },

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("operator is not a projector (deviation {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("phase cells do not form a resolution of the identity: {0}")]
    InvalidPartition(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("state is not normalized (deviation {deviation:e})")]
    Normalization { deviation: f64 },

    #[error("imaginary residue {residue:e} exceeds tolerance")]
    ImaginaryResidue { residue: f64 },

    #[error("conditional expectation undefined for cell {alpha}: weight {weight:e} below floor")]
    UndefinedConditional { alpha: usize, weight: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature check failed: {0}")]
    Quadrature(String),

    #[error("L = {l} exceeds the cap {max} for this brute-force routine")]
    ChainTooLong { l: usize, max: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

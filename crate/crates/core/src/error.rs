use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("matrix is not unipotent upper triangular")]
    NotUnipotent,

    #[error("matrix is not strictly upper triangular")]
    NotNilpotent,

    #[error("element does not lie in the subgroup (residual {0:e})")]
    NotInSubgroup(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "quadrature did not converge within {nodes} nodes (last refinements {previous} and {last})"
    )]
    QuadratureNonConvergence {
        nodes: usize,
        previous: Complex64,
        last: Complex64,
    },

    #[error("fundamental domain reduction exceeded {0} steps")]
    ReductionDiverged(usize),

    #[error("estimate dominated by noise: {0}")]
    LowSignal(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnsupportedDimension(_) => "unsupported_dimension",
            Error::NotUnipotent => "not_unipotent",
            Error::NotNilpotent => "not_nilpotent",
            Error::NotInSubgroup(_) => "not_in_subgroup",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Precondition(_) => "precondition",
            Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            Error::ReductionDiverged(_) => "reduction_diverged",
            Error::LowSignal(_) => "low_signal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

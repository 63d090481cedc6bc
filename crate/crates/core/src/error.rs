use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tensors are not injective for any block length up to {k_max}; try a larger strength or another seed")]
    NotInjective { k_max: usize },

    #[error("leading eigenvalue is degenerate (gap {gap:.3e}); fixed point is not unique")]
    DegenerateLeadingEigenvalue { gap: f64 },

    #[error("fixed point is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NonPositiveFixedPoint { min_eigenvalue: f64 },

    #[error("model parse error: {0}")]
    Parse(String),

    #[error("unsupported model schema {found:?}, expected {expected:?}")]
    SchemaVersion { found: String, expected: String },

    #[error("model validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("byproduct C_{index} is not a phase times a symmetry operator")]
    SymmetryConditionViolated { index: usize },

    #[error("Lie closure exceeded {max_dim} dimensions")]
    MaxDimExceeded { max_dim: usize },

    #[error("realizable algebra has dimension {dim}, su(2) needs 3")]
    ClosureTooSmall { dim: usize },

    #[error("off-diagonal |nu_ij| = {magnitude:.3e} is numerically zero")]
    ZeroOffDiagonal { magnitude: f64 },

    #[error("overlap Tr(rho_fix rho_bar_fix) = {overlap:.3e} is below 1e-10")]
    DegenerateOverlap { overlap: f64 },

    #[error("dense resource needs {amplitudes} amplitudes, cap is {cap}")]
    SizeCapExceeded { amplitudes: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from spectra, fixed points and other numerics
    /// rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateLeadingEigenvalue { .. }
                | Error::NonPositiveFixedPoint { .. }
                | Error::MaxDimExceeded { .. }
                | Error::ClosureTooSmall { .. }
                | Error::ZeroOffDiagonal { .. }
                | Error::DegenerateOverlap { .. }
                | Error::NotInjective { .. }
        )
    }
}

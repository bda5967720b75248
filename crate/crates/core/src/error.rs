use thiserror::Error;

/// Errors raised by the simulator, the adversary machinery and the analysis oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not unitary: max |U^dagger U - I| entry is {deviation:.3e}")]
    NonUnitary { deviation: f64 },

    #[error("drawn measurement branch has probability {probability:.3e}")]
    DegenerateBranch { probability: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized: norm^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("basis vectors are not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalBasis { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("inconsistent collective-attack parameters: {0}")]
    InconsistentParams(String),

    #[error("empty run: no rounds to process")]
    EmptyRun,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

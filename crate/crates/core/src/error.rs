use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {n} outside supported range {min}..={max}")]
    DimensionOutOfRange { n: usize, min: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("generated group exceeds {0} elements")]
    GroupTooLarge(usize),

    #[error("Casimir operator is not scalar (spread {0:.3e})")]
    NonScalarCasimir(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("Gram matrix not positive definite at t = {0}")]
    NotPositiveDefinite(f64),

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("invariant space is empty")]
    EmptyInvariantSpace,

    #[error("invariant space is nonempty (dimension {0})")]
    NonemptyInvariantSpace(usize),

    #[error("degenerate eigenvalue: {0}")]
    DegenerateEigenvalue(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("not positive definite: {0}")]
    NotPositiveDefiniteMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("Jacobian is numerically singular")]
    JacobianSingular,

    #[error("augmented solve returned a rank-deficient basis")]
    DegenerateBasis,

    #[error("matrix is not stable: rightmost eigenvalue has real part {0:e}")]
    NotStable(f64),

    #[error("recovery failed: {0}")]
    RecoveryFailed(String),

    #[error("{0} is not supported for this operator")]
    Unsupported(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

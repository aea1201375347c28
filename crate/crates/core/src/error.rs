use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("no uniform placement exists: mu*K = {mu}*{users} is not divisible by N = {files}")]
    InfeasibleUniformPlacement { users: usize, files: usize, mu: usize },

    #[error("no covering placement exists: mu*K = {mu}*{users} < N = {files}")]
    InfeasiblePlacement { users: usize, files: usize, mu: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("affine system is rank deficient (deficiency {deficiency}) and the constraints are inconsistent")]
    SingularSystem { deficiency: usize },

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

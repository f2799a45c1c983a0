use thiserror::Error;

/// Errors raised across the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undeclared decision variable `{0}`")]
    UndeclaredVariable(String),

    #[error("singular distance to a primary ({0:.3e})")]
    Singular(f64),

    #[error("system matrix is not Hurwitz (max real eigenvalue {0:.6e})")]
    NotHurwitz(f64),

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("solver back-end error: {0}")]
    Solver(String),

    #[error("solver hit its iteration limit")]
    IterationLimit,

    #[error("precision {0} too low for an angle interpretation")]
    AngleDomain(f64),

    #[error("malformed document: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

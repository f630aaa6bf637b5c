use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is rank deficient; use a positive damping factor")]
    RankDeficient,
    #[error("link index {index} out of range (robot has {links} links)")]
    LinkOutOfRange { index: usize, links: usize },
    #[error("witness point coincides with the obstacle center; normal undefined")]
    DegenerateNormal,
    #[error("Hessian is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

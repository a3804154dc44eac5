use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: {field} = {value} outside [{min}, {max}]")]
    Range {
        path: PathBuf,
        line: u64,
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("missing context field `{0}`")]
    MissingField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Hessian of the joint log-likelihood is not positive definite at the mode (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("inner mode search did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    InnerNonConvergence { iterations: usize, grad_norm: f64 },

    #[error("schema mismatch: missing {missing:?}, unexpected {unexpected:?}")]
    Schema {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("single-class response: every label is {0}")]
    SingleClass(f64),

    #[error("degenerate residual variance in GCM test")]
    DegenerateVariance,

    #[error("residual covariance is rank deficient")]
    RankDeficient,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("play {0} has no predicted per-play random effect")]
    MissingPlayEffect(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

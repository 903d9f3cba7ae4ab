use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("window/hop combination violates the overlap-add condition at sample {sample}")]
    Cola { sample: usize },

    #[error("solver diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("ill-conditioned frequency pair ({0:.6}, {1:.6})")]
    IllConditioned(f64, f64),

    #[error("vandermonde decomposition not applicable: numerical rank {rank} equals dimension")]
    FullRank { rank: usize },

    #[error("undefined entropy: distribution has no positive mass")]
    EmptyDistribution,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing sample rate (no header line and no override)")]
    MissingSampleRate,

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, form types or twist charges do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A pointwise computation broke down (singular or indefinite matrix).
    #[error("numerical failure at grid point {point}: {msg}")]
    Numerical { point: usize, msg: String },

    #[error("normalized sequence has no detectable limit; gap series {gaps:?}")]
    NoLimit { gaps: Vec<f64> },

    #[error("no stable rank plateau; eigen-count histogram {histogram:?}")]
    NoPlateau { histogram: Vec<usize> },

    #[error("slope of a rank-0 subsheaf is undefined")]
    UndefinedSlope,

    #[error("series stage `{stage}` left a nonzero relation residual {residual:e}")]
    SeriesStage { stage: String, residual: f64 },

    #[error("scenario error at `{key}`: {msg}")]
    Scenario { key: String, msg: String },

    #[error("unknown {kind} `{name}`; available: {available}")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

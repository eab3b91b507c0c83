use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants mirror the failure surfaces of the
/// pipeline: corpus loading, backend access, detector scoring, and the
/// two-stage search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("sample size error: requested {requested} from a pool of {available}")]
    SampleSize { requested: usize, available: usize },

    #[error("backend '{model_id}' lacks the '{capability}' capability required by {operation}")]
    MissingCapability {
        model_id: String,
        capability: &'static str,
        operation: &'static str,
    },

    #[error("detector '{detector}' is unsupported on this backend: {reason}")]
    UnsupportedDetector { detector: String, reason: String },

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("auxiliary model returned an empty result after retry")]
    EmptyRewrite,

    #[error("sample '{sample_id}': {source}")]
    SampleFailure {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("stage-2 iteration {index}: {source}")]
    Iteration {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("search error: {0}")]
    Search(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the id of the sample that triggered it.
    pub fn for_sample(self, sample_id: &str) -> Error {
        Error::SampleFailure {
            sample_id: sample_id.to_string(),
            source: Box::new(self),
        }
    }
}

use std::path::PathBuf;

/// Errors raised by every fallible operation in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: field `{field}`: {reason}")]
    MalformedRecord {
        line: usize,
        field: String,
        reason: String,
    },

    #[error("duplicate post_id `{post_id}` in forum `{forum_id}` (line {line})")]
    DuplicatePost {
        forum_id: String,
        post_id: String,
        line: usize,
    },

    #[error("line {line}: mixed forum ids in one dump (`{expected}` then `{found}`)")]
    MixedForum {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },

    #[error("duplicate example key `{0}`")]
    DuplicateKey(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("class `{0}` has no examples")]
    MissingClass(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("feature space: {0}")]
    FeatureSpace(String),

    #[error("non-finite feature value in example {index}")]
    NonFinite { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("seed infeasible: class `{class}` empty at threshold floor {floor}")]
    SeedInfeasible { class: &'static str, floor: f64 },

    #[error("line {line}: cannot parse `{text}` as a dotted-quad address")]
    BadAddress { line: usize, text: String },

    #[error("unsupported file format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("every listed candidate word has zero probability")]
    AllZeroMass,
    #[error("word `{0}` is not listed in any attribute category")]
    UnknownWord(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("group weights do not match the groups present: {0}")]
    WeightMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid baseline spec: {0}")]
    InvalidSpec(String),
    #[error("no closed form for baseline: {0}")]
    UnsupportedSpec(String),

    #[error("invalid word schema: {0}")]
    InvalidSchema(String),
    #[error("slot spans overlap")]
    SlotCollision,
    #[error("empty context set")]
    EmptyContextSet,
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("bad template `{0}`")]
    BadTemplate(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend cannot serve this request: {0}")]
    Unsupported(String),
    #[error("backend rejected credentials: {0}")]
    AuthFailure(String),
    #[error("cell (context `{context_id}`, group `{group_id}`): {source}")]
    Cell {
        context_id: String,
        group_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("tensor cache {path} was built from different inputs ({what} hash differs)")]
    CacheMismatch { path: PathBuf, what: &'static str },
    #[error("incomplete tensor: {0}")]
    IncompleteTensor(String),

    #[error("degenerate design: regressor values are constant")]
    DegenerateDesign,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("factor table lists groups missing from the report: {0:?}")]
    MissingGroups(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for errors raised while talking to a model backend.
    pub fn is_backend(&self) -> bool {
        match self {
            Error::BackendUnavailable(_) | Error::MalformedResponse(_) | Error::AuthFailure(_) => true,
            Error::Cell { source, .. } => source.is_backend(),
            _ => false,
        }
    }
}

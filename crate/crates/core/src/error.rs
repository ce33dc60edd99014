use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("stratification impossible: {0}")]
    Stratification(String),

    #[error("degenerate normalization range: p_min={p_min}, p_max={p_max}")]
    DegenerateRange { p_min: f64, p_max: f64 },

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("zero-norm embedding at sample {0}")]
    SingularEmbedding(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("truncated container {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("checksum mismatch in {path}: stored {stored:08x}, computed {computed:08x}")]
    Checksum {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Self::Json {
            context: context.into(),
            source,
        }
    }

    /// Broad failure class, used by the command-line front end to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Dimension(_)
            | Error::Data(_)
            | Error::Stratification(_)
            | Error::DegenerateRange { .. }
            | Error::UndefinedAuc(_)
            | Error::Format { .. }
            | Error::Truncated { .. }
            | Error::Checksum { .. }
            | Error::Io { .. }
            | Error::Json { .. } => ErrorKind::Data,
            Error::DegenerateVariance(_)
            | Error::SingularEmbedding(_)
            | Error::NonFinite(_)
            | Error::Diverged { .. } => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

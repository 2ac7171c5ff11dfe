use std::path::{Path, PathBuf};

use structcot_core::{DatasetError, MetricError, PackError, PromptError, RatingError};

/// Every failure the harness surfaces. Each variant maps to a stable,
/// greppable code printed by the CLI as `error[E_...]`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("dataset {path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
    #[error("dataset {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("schema {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("template pack `{name}`: {message}")]
    Pack { name: String, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("model `{model}`: {message}")]
    ModelConfig { model: String, message: String },
    #[error("model `{model}` endpoint {url} is unreachable: {message}")]
    Unreachable {
        model: String,
        url: String,
        message: String,
    },
    #[error("run store: {0}")]
    Store(String),
    #[error("rating sheet: {0}")]
    Sheet(String),
    #[error("rating sheet tampered: {0}")]
    Tamper(String),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Manifest(_) => "E_MANIFEST",
            Error::Dataset { .. } | Error::Csv { .. } => "E_DATASET",
            Error::Schema { .. } => "E_SCHEMA",
            Error::Pack { .. } => "E_PACK",
            Error::Prompt(_) => "E_PROMPT",
            Error::ModelConfig { .. } => "E_MODEL_CONFIG",
            Error::Unreachable { .. } => "E_UNREACHABLE",
            Error::Store(_) => "E_STORE",
            Error::Sheet(_) => "E_SHEET",
            Error::Tamper(_) => "E_TAMPER",
            Error::Rating(_) => "E_RATINGS",
            Error::Metric(_) => "E_METRIC",
            Error::Usage(_) => "E_USAGE",
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn pack(name: impl Into<String>, err: PackError) -> Error {
        Error::Pack {
            name: name.into(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

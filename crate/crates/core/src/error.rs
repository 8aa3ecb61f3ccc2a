use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reduced-order-modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parameter {values:?} outside domain [{lower:?}, {upper:?}]")]
    Domain {
        values: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },

    #[error("non-finite value at index {index} during {context}")]
    Evaluation { index: usize, context: &'static str },

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("inner solve did not converge at step {step} (residual {residual:e})")]
    NonConvergence { step: usize, residual: f64 },

    #[error("{model} is not differentiable; use {alternative} instead")]
    Capability {
        model: String,
        alternative: &'static str,
    },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing artifact {path} (run the `{stage}` stage first)")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Config(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: field `{field}`: {reason}")]
    Parse {
        line: usize,
        field: String,
        reason: String,
    },

    #[error("invalid graph `{sample}`: {reason}")]
    InvalidGraph { sample: String, reason: String },

    #[error("feature `{feature}`: raw code {code} exceeds width {width}")]
    CodeOutOfRange {
        feature: &'static str,
        code: u32,
        width: u32,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("phase `{phase}` failed on sample `{sample}`: {source}")]
    Phase {
        phase: &'static str,
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str, sample: impl Into<String>) -> Self {
        match self {
            e @ Error::Phase { .. } => e,
            other => Error::Phase {
                phase,
                sample: sample.into(),
                source: Box::new(other),
            },
        }
    }
}

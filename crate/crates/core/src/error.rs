use std::path::PathBuf;

use crate::frame::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed PFM {path}: {reason}")]
    Pfm { path: PathBuf, reason: String },
    #[error("empty sequence")]
    EmptySequence,
    #[error("frame {frame} is missing channel `{channel}`")]
    MissingChannel { frame: usize, channel: String },
    #[error("channel `{channel}` in frame {frame} is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        frame: usize,
        channel: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid frame data: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn pfm(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Pfm {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    let mut out = String::new();
    for (i, v) in violations.iter().take(4).enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&v.to_string());
    }
    if violations.len() > 4 {
        out.push_str(&format!("; and {} more", violations.len() - 4));
    }
    out
}

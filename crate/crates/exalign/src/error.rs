//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A text artifact (dataset, model, anchors, explanations, config)
    /// failed to parse. Carries the offending line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Shapes disagree: feature dimensions, mask lengths, anchor dims, ...
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A graph violated a structural invariant at construction time.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// Bad configuration value or unknown key.
    #[error("invalid config: {0}")]
    Config(String),

    /// Training or mask optimization produced a non-finite loss.
    #[error("optimization diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    /// A metric is undefined for the given input (e.g. AUROC with an
    /// empty or all-edge ground-truth set).
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(path: impl AsRef<std::path::Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CcError {
    /// A caller passed an out-of-range or otherwise invalid argument.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Recipe, CLI or pipeline configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural requirement.
    #[error("data error: {0}")]
    Data(String),

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Training diverged; carries enough context to diagnose which epoch and layer blew up.
    #[error("training diverged at epoch {epoch}: loss {loss}, layer weight norms {layer_norms:?}")]
    NonFinite {
        epoch: usize,
        loss: f64,
        layer_norms: Vec<f64>,
    },

    /// The requested quantity is mathematically undefined for the given input.
    #[error("undefined: {0}")]
    Undefined(String),

    /// A pipeline stage failed; wraps the underlying error with stage and seed.
    #[error("stage `{stage}` failed for seed {seed}: {source}")]
    Stage {
        stage: &'static str,
        seed: u64,
        #[source]
        source: Box<CcError>,
    },
}

impl CcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CcError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        CcError::Parse {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str, seed: u64) -> Self {
        CcError::Stage {
            stage,
            seed,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CcError::Argument(_) | CcError::Config(_) => 2,
            CcError::Data(_) | CcError::Parse { .. } | CcError::Io { .. } => 3,
            CcError::Stage { source, .. } => source.exit_code(),
            CcError::NonFinite { .. } | CcError::Undefined(_) => 1,
        }
    }
}

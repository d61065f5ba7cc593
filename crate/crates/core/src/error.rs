use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("nodes {first} and {second} have identical coordinates")]
    DegenerateDistance { first: usize, second: usize },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose by {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no closed-form density for symmetric alpha-stable noise with alpha = {alpha}")]
    UnsupportedDensity { alpha: f64 },

    #[error("estimate diverged at timestep {timestep}")]
    Divergence { timestep: usize },

    #[error("non-finite value at layer {layer}")]
    LayerDivergence { layer: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension { context, expected, got }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for numerical failures (divergence) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::LayerDivergence { .. })
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim(context, expected, got))
    }
}

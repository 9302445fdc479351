use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("cutoff: no guided mode above the substrate index")]
    Cutoff,

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no crossing in range [{lo} um, {hi} um]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("singular sampling circle: the field has a zero on it ({fraction:.1}% of samples below threshold)")]
    SingularCircle { fraction: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }

    /// Short machine-readable tag used in run manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Model(_) => "model",
            Error::Contract(_) => "contract",
            Error::Cutoff => "cutoff",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NoCrossing { .. } => "no_crossing",
            Error::SingularCircle { .. } => "singular_circle",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }
}

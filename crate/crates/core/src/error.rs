//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or degenerate geometry description.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Malformed mesh, field or config file.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// A zero (or numerically negligible) pivot was met during factorization.
    #[error("singular system: pivot {pivot} has magnitude {magnitude:e}")]
    Singular { pivot: usize, magnitude: f64 },

    /// The linear system is singular by construction (e.g. pure Neumann
    /// without a zero-mean constraint).
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Iterative solver or series did not converge.
    #[error("convergence failure after {iterations} iterations (last residual {last:e})")]
    Convergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    /// The data violate a compatibility condition.
    #[error("compatibility condition `{condition}` violated: residual {residual:e} (tolerance {tolerance:e})")]
    Compatibility {
        condition: &'static str,
        residual: f64,
        tolerance: f64,
    },

    /// A precondition on the inputs does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two fields or a field and a problem live on different meshes.
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    /// The mesh is too coarse for the requested quantity.
    #[error("insufficient resolution: need h <= {required:e}, have {actual:e}")]
    Resolution { required: f64, actual: f64 },

    /// The reference solver could not reach its self-consistency target.
    #[error("reference solver refused: Richardson disagreement {disagreement:e} at N = {n}")]
    OracleRefused { disagreement: f64, n: usize },

    /// The requested geometry is not supported by this routine.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A stored artifact is missing or unreadable.
    #[error("integrity error in {path}: {message}")]
    Integrity { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Geometry(_)
                | Error::Format { .. }
                | Error::Compatibility { .. }
                | Error::Precondition(_)
                | Error::MeshMismatch(_)
                | Error::Resolution { .. }
                | Error::UnsupportedGeometry(_)
                | Error::Config(_)
                | Error::Integrity { .. }
                | Error::Io { .. }
        )
    }
}

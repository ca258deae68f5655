use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate extent: {0}")]
    DegenerateExtent(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("spline fit failed: {0}")]
    Fit(String),

    #[error("point ({x}, {y}) lies outside the surface domain")]
    Domain { x: f64, y: f64 },

    #[error("iteration did not converge: {message} (trace: {trace:?})")]
    NonConvergence { message: String, trace: Vec<f64> },

    #[error("every sample was eliminated: {0}")]
    EmptySurface(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("link {link} has zero length (particles {a} and {b} coincide)")]
    DegenerateGeometry { link: usize, a: usize, b: usize },

    #[error("simulation diverged at step {step} (particle {particle})")]
    Divergence { step: u64, particle: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips any number of `Stage` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Format(_)
                | Error::DegenerateExtent(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

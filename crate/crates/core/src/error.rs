use std::path::PathBuf;

use nalgebra::DVector;

use crate::dynsys::SolveStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },

    #[error(
        "Newton iteration did not converge after {} iterations (residual norm {:.3e})",
        stats.iterations,
        stats.final_residual_norm
    )]
    NewtonDiverged {
        last_iterate: DVector<f64>,
        stats: SolveStats,
    },

    #[error("singular linear system in {0}")]
    Singular(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("time step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {}: {reason}", path.display())]
    MissingArtifact { path: PathBuf, reason: String },

    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(step: usize, source: Error) -> Self {
        Error::AtStep {
            step,
            source: Box::new(source),
        }
    }

    /// Strips any [`Error::AtStep`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of inputs or files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NewtonDiverged { .. } | Error::Singular(_) | Error::NonFinite(_)
        )
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}

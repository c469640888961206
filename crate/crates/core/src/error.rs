use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Every variant maps onto a stable machine-readable `code()` and the name of
/// the module that raised it, which is what the CLI prints on standard error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("sigma = {sigma} is not of the form cos(pi / (2 (l + 2))) for an integer l >= 0")]
    UnsupportedSigma { sigma: f64 },

    #[error("sigma = 0 is handled by the degenerate construction; use `degenerate::{0}`")]
    DegenerateSigma(&'static str),

    #[error("coupled regulator iteration did not converge after {iterations} iterations (last gap {last_gap:e})")]
    NonConvergence { iterations: usize, last_gap: f64 },

    #[error("{process} fell to {value:e} at grid index {index}; regulator pair is not converged")]
    Consistency {
        process: &'static str,
        index: usize,
        value: f64,
    },

    #[error("paths are not on a common grid: {0}")]
    GridMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::Domain(_) => "domain",
            Error::UnsupportedSigma { .. } => "unsupported-sigma",
            Error::DegenerateSigma(_) => "degenerate-sigma",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Consistency { .. } => "consistency",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } | Error::DegenerateSigma(_) => "model",
            Error::UnsupportedSigma { .. } => "stationary",
            Error::NonConvergence { .. } | Error::GridMismatch(_) => "skorokhod",
            Error::Consistency { .. } => "pathgen",
            Error::Domain(_) => "model",
            Error::Config(_) | Error::Io(_) => "cli",
        }
    }

    /// `true` for errors caused by the caller's inputs, as opposed to
    /// failures of the numerical machinery or the environment.
    pub fn is_domain_error(&self) -> bool {
        !matches!(
            self,
            Error::NonConvergence { .. } | Error::Consistency { .. } | Error::Io(_)
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

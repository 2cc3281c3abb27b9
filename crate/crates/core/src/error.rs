use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a precondition. `param` names the offending input.
    #[error("invalid `{param}`: {reason}")]
    Domain { param: &'static str, reason: String },

    /// A query fell outside a precomputed table.
    #[error("`{param}` = {value} is outside the table horizon {horizon}")]
    Range {
        param: &'static str,
        value: f64,
        horizon: f64,
    },

    /// A numerical procedure failed (instability, non-convergence).
    #[error("numerical failure in {context}: {reason}")]
    Numerical { context: &'static str, reason: String },

    /// Every Monte Carlo sample produced a degenerate estimate.
    #[error("all {paths} paths were degenerate for {estimator}")]
    AllDegenerate { estimator: String, paths: usize },
}

impl Error {
    pub(crate) fn domain(param: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            param,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(context: &'static str, reason: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors surfaced by the laboratory.
///
/// The variants fall in two families that the command-line front end maps to
/// distinct exit codes: contract violations (bad parameters, unmet
/// preconditions) and numerical failures (integration, frames, solvers).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        last_state: Vec<f64>,
        reason: String,
    },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("unresolved crossing: {0}")]
    UnresolvedCrossing(String),

    #[error("linear program solver failure: {0}")]
    Solver(String),

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by the caller's input rather than by numerics.
    pub fn is_contract_violation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid action set: {0}")]
    InvalidSet(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("point lies outside the action set (violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("point is not strictly interior to the regularizer domain")]
    NotInterior,

    #[error("pseudo-gradient returned a non-finite value at x = {x:?}")]
    NonFinitePseudoGradient { x: Vec<f64> },

    #[error("equilibrium solver stopped after {iterations} iterations with residual {residual:.3e}")]
    NotConverged {
        last: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("trajectory has no Lyapunov samples")]
    MissingLyapunov,

    #[error("invalid settings: {0}")]
    Settings(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

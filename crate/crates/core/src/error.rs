use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("no fixed point found: {0}")]
    NoFixedPoint(String),

    #[error("no sign change of the leading real part on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("thinning envelope violated: rate {rate} exceeds envelope {envelope} at t = {time}")]
    Envelope { rate: f64, envelope: f64, time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wealth {x} is below the domain lower end {lo}")]
    Domain { x: f64, lo: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: {reason}")]
    Quadrature { lo: f64, hi: f64, reason: String },

    #[error("value function slope {slope} at x = {x} is not negative; the HJB infimum is unbounded")]
    NonDecreasingValue { x: f64, slope: f64 },

    #[error("state integration produced a non-finite value at t = {t} (last good state {last_state})")]
    IntegrationFault { t: f64, last_state: f64 },

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("all {paths} simulated paths faulted")]
    AllPathsFaulted { paths: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

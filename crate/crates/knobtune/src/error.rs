//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the tuning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad knob space, schedule, scenario, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure (e.g. covariance factorization at maximum jitter).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A search ran out of unsampled knob settings.
    #[error("knob space exhausted: {0}")]
    Exhausted(String),

    /// The sampling budget of the current phase is already spent.
    #[error("sampling phase complete: all {0} rounds consumed")]
    PhaseComplete(usize),

    /// Malformed or out-of-order wire traffic.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The peer closed the session or the transport failed.
    #[error("session error: {0}")]
    Session(String),

    /// Exhaustive search found no setting that meets the constraints.
    #[error("oracle infeasible: no setting satisfies the constraints")]
    OracleInfeasible,

    /// QoS is undefined because a denominator expectation is zero.
    #[error("undefined QoS: zero {0} expectation")]
    UndefinedQos(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

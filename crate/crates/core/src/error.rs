use thiserror::Error;

/// Errors raised by model construction, simulation and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("network failed validation: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("voltage magnitude at generator node {node} is zero")]
    SingularVoltage { node: usize },

    #[error("load-bus algebraic solve did not converge after {iterations} iterations (residual {residual:e})")]
    AlgebraicSolve { iterations: usize, residual: f64 },

    #[error("state diverged at t = {time} s")]
    Diverged { time: f64 },

    #[error("singular linear system of dimension {0}")]
    SingularMatrix(usize),

    #[error("inter-cell line {line} reached its flow limit at t = {time} s")]
    CongestionViolation { line: usize, time: f64 },

    #[error("centralized solve did not converge after {iterations} iterations (residual {residual:e})")]
    CentralizedSolve { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

use crate::types::BirkhoffState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    /// Eigenvalue spacing below one: the Galerkin truncation is too small for
    /// the requested number of Birkhoff coordinates.
    #[error("truncation error at index {index}: spacing {spacing:.3e} < 1 (M_cut = {m_cut})")]
    Truncation {
        index: usize,
        spacing: f64,
        m_cut: usize,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("step size underflow at t = {t:.6e} (dt = {dt:.3e})")]
    StepUnderflow {
        t: f64,
        dt: f64,
        last: Box<BirkhoffState>,
    },

    #[error("divergence at t = {t:.6e}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("generating function pole: mu = {mu} <= -lambda_0 = {bound}")]
    Pole { mu: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must be square n x n with n a power of two >= 8 (got {len} values for n = {n})")]
    InvalidGrid { n: usize, len: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("torus modulus must lie in the upper half-plane (Im tau = {im})")]
    InvalidModulus { im: f64 },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("step size {dt:e} underflows the time scale (t_max = {t_max})")]
    StepUnderflow { dt: f64, t_max: f64 },

    #[error("metric left the finite range at step {step} (t = {t})")]
    NonFiniteStep { step: usize, t: f64 },

    #[error("eigensolver did not converge: {converged} of {wanted} pairs below relative residual {tol:e} at subspace dimension {dim}")]
    IterationFailure { converged: usize, wanted: usize, tol: f64, dim: usize },

    #[error("requested {requested} eigenpairs but only {available} continuum-resolved modes exist")]
    TooManyModes { requested: usize, available: usize },

    #[error("heat-trace fit rejected: constant term {c0:.6} differs from -1 by more than 0.05")]
    FitRejected { c0: f64 },

    #[error("trajectory has fewer than two recorded samples")]
    EmptyTrajectory,

    #[error("only {samples} samples in the final decade of residual decay (need 5)")]
    InsufficientDecay { samples: usize },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { key: key.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

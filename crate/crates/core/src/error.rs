use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("grid spacing h = {h} too coarse: {nodes} nodes per axis, at least 8 required")]
    TooCoarse { h: f64, nodes: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid condenser: {0}")]
    InvalidCondenser(String),
    #[error("capacity minimization did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("delta ratio {raw} exceeds 1 beyond the clamping window")]
    DeltaOutOfRange { raw: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("region outside the grid: {0}")]
    OutsideGrid(String),
    #[error("solver aborted at step {step} (t = {time:e}): {reason}")]
    SolverAborted { step: usize, time: f64, reason: String },
    #[error("empty node set: {0}")]
    EmptySet(String),
    #[error("resolution-limited: {0}")]
    ResolutionLimited(String),
    #[error("no admissible rho_0: {0}")]
    NoAdmissibleRadius(String),
    #[error("insufficient scale: {found} admissible radii, at least {needed} required")]
    InsufficientScale { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

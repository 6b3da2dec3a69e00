use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension {got} not supported here (need {need})")]
    Dimension { got: usize, need: &'static str },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("frame is not orthonormal (defect {defect:.3e})")]
    NonOrthonormalFrame { defect: f64 },

    #[error("matrix Ric - rho*I is not positive definite")]
    NotPositiveDefinite,

    #[error("time {t} is not in the past (t < 0 required)")]
    NonNegativeTime { t: f64 },

    #[error("neckpinch: warp factor reached {min_phi:.3e} at z = {z:.6}")]
    Neckpinch { min_phi: f64, z: f64 },

    #[error("shooting failed at z = {z:.6}: {reason} (last residual {residual:.3e})")]
    Shooting {
        z: f64,
        reason: String,
        residual: f64,
    },

    #[error("query ({z}, {t}) outside the representation window")]
    OutsideWindow { z: f64, t: f64 },

    #[error("Newton iteration diverged after {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("metric perturbation {eps_hat:.3e} exceeds admissibility gate {gate:.3e}")]
    Inadmissible { eps_hat: f64, gate: f64 },

    #[error("foliation breakdown: {0}")]
    Foliation(String),

    #[error("window too short: need {needed}, have {have}")]
    Window { needed: f64, have: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

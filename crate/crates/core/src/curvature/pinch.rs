use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `inf { λ : -λ M <= h <= λ M }` with `M = Ric - ρ I`, i.e. the spectral
/// radius of `M^{-1/2} h M^{-1/2}`.
pub fn weighted_pinch_norm(h: &DMatrix<f64>, ric: &DMatrix<f64>, rho: f64) -> Result<f64> {
    let n = h.nrows();
    if h.ncols() != n || ric.nrows() != n || ric.ncols() != n {
        return Err(LabError::Invalid("h and Ric must be square of equal size".into()));
    }
    if (h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
        return Err(LabError::Invalid("h must be symmetric".into()));
    }
    let m = ric - DMatrix::identity(n, n) * rho;
    let m = 0.5 * (&m + m.transpose());
    let chol = m.cholesky().ok_or(LabError::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(LabError::NotPositiveDefinite)?;
    let k = &linv * h * linv.transpose();
    let k = 0.5 * (&k + k.transpose());
    let ev = SymmetricEigen::new(k).eigenvalues;
    Ok(ev.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
}

/// The time-weighted quantity `ψ = e^{2ρt} λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchNorm {
    pub rho: f64,
    pub t: f64,
    pub lambda: f64,
    pub psi: f64,
}

impl PinchNorm {
    pub fn compute(h: &DMatrix<f64>, ric: &DMatrix<f64>, rho: f64, t: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(LabError::Invalid("rho must be positive".into()));
        }
        let lambda = weighted_pinch_norm(h, ric, rho)?;
        Ok(Self {
            rho,
            t,
            lambda,
            psi: (2.0 * rho * t).exp() * lambda,
        })
    }
}

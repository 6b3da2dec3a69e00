//! Pointwise curvature algebra: operators, isotropic-curvature predicates,
//! the four-dimensional block picture with its reaction ODE, invariant cones
//! and the weighted pinch norm.

pub mod blocks;
pub mod cones;
pub mod isotropic;
pub mod ode;
pub mod operator;
pub mod pinch;

pub use blocks::{block_decompose_4d, block_pic_margin, BlockReport, FourDBlocks};
pub use cones::{cone_margin, default_s0, normalized_cone_margin, q_of_s, ConeKind, ConeSpec};
pub use isotropic::{brute_force_min, isotropic_value, min_isotropic, FourFrame, IsoMin, IsoMode};
pub use ode::{cofactor, hamilton_ode_step, hamilton_rhs, trace_identity_sides};
pub use operator::CurvatureOperator;
pub use pinch::{weighted_pinch_norm, PinchNorm};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `R_ijkl = δ_ik A_jl + δ_jl A_ik − δ_il A_jk − δ_jk A_il`.
pub fn rotationally_symmetric_operator(a: &DMatrix<f64>) -> Result<CurvatureOperator> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LabError::Invalid("A must be square".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
        return Err(LabError::Invalid("A must be symmetric".into()));
    }
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    CurvatureOperator::from_fn(n, |i, j, k, l| {
        d(i, k) * a[(j, l)] + d(j, l) * a[(i, k)] - d(i, l) * a[(j, k)] - d(j, k) * a[(i, l)]
    })
}

/// `4 A_ij φ_ik φ_jk`, the closed form of `R(φ, φ)` for the operator above.
pub fn rotational_two_form_value(a: &DMatrix<f64>, phi: &DMatrix<f64>) -> f64 {
    4.0 * (a.component_mul(&(phi * phi.transpose()))).sum()
}

/// Unit-radius cylinder `S^{n-1} × R` (axis last).
pub fn cylinder_operator(n: usize) -> Result<CurvatureOperator> {
    let mut diag = vec![0.5; n];
    diag[n - 1] = -0.5;
    rotationally_symmetric_operator(&DMatrix::from_diagonal(&diag.into()))
}

/// Unit round sphere `S^n`.
pub fn sphere_operator(n: usize) -> Result<CurvatureOperator> {
    rotationally_symmetric_operator(&(DMatrix::identity(n, n) * 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPic {
    pub holds: bool,
    pub margin: f64,
}

/// Options for the frame search used when `n >= 5`.
#[derive(Debug, Clone, Copy)]
pub struct PicSearch {
    pub budget: usize,
    pub seed: u64,
}

impl Default for PicSearch {
    fn default() -> Self {
        Self { budget: 2000, seed: 0 }
    }
}

/// Uniform PIC with constant `α`.
///
/// For `n >= 5`: `min PIC − α·scal`. For `n = 4`:
/// `min{a1+a2, c1+c2} − α·max{a3, b3, c3}`.
pub fn is_uniformly_pic(r: &CurvatureOperator, alpha: f64, search: PicSearch) -> Result<UniformPic> {
    if !(alpha > 0.0) {
        return Err(LabError::Invalid("alpha must be positive".into()));
    }
    let margin = if r.n() == 4 {
        let b = block_decompose_4d(r)?;
        let lhs = block_pic_margin(&b);
        let rhs = b.a_eig[2].max(b.b_sv[2]).max(b.c_eig[2]);
        lhs - alpha * rhs
    } else {
        let m = min_isotropic(r, IsoMode::Pic, search.budget, search.seed)?;
        m.value - alpha * r.scal()
    };
    Ok(UniformPic {
        holds: margin >= 0.0,
        margin,
    })
}

/// Largest `α` for which the four-dimensional block inequality holds.
pub fn uniform_pic_threshold_4d(r: &CurvatureOperator) -> Result<f64> {
    let b = block_decompose_4d(r)?;
    let rhs = b.a_eig[2].max(b.b_sv[2]).max(b.c_eig[2]);
    if rhs <= 0.0 {
        return Err(LabError::Invalid("max{a3, b3, c3} must be positive".into()));
    }
    Ok(block_pic_margin(&b) / rhs)
}

/// Largest `α` with `min PIC >= α·scal` (any `n >= 4`).
pub fn uniform_pic_threshold_scalar(r: &CurvatureOperator, search: PicSearch) -> Result<f64> {
    let scal = r.scal();
    if scal <= 0.0 {
        return Err(LabError::Invalid("scalar curvature must be positive".into()));
    }
    Ok(min_isotropic(r, IsoMode::Pic, search.budget, search.seed)?.value / scal)
}

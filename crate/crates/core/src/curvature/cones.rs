//! Invariant-cone membership margins for four-dimensional block data.

use serde::{Deserialize, Serialize};

use super::blocks::FourDBlocks;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConeKind {
    /// `(b2+b3)² <= Φ(a1+a2)(c1+c2)`, `a2+a3 <= (Φ+1)(a1+a2)`, `c2+c3 <= (Φ+1)(c1+c2)`
    C0,
    /// `C0` plus `s(a1+a2+a3) <= a1` and `s(c1+c2+c3) <= c1`
    Pinched,
    /// `s b3² <= a1 c1` and `(b2+b3)² <= q(s)(a1+a2)(c1+c2)`
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub phi: f64,
    pub s: f64,
}

/// `s0 = 1 / (3(Φ+1)(4Φ+3))`
pub fn default_s0(phi: f64) -> f64 {
    1.0 / (3.0 * (phi + 1.0) * (4.0 * phi + 3.0))
}

/// `q(s) = (s+1) / (2s)`
pub fn q_of_s(s: f64) -> f64 {
    (s + 1.0) / (2.0 * s)
}

impl ConeSpec {
    pub fn c0(phi: f64) -> Result<Self> {
        Self::validated(ConeKind::C0, phi, 0.0)
    }

    pub fn pinched(phi: f64, s: f64) -> Result<Self> {
        Self::validated(ConeKind::Pinched, phi, s)
    }

    pub fn pinched_default(phi: f64) -> Result<Self> {
        Self::validated(ConeKind::Pinched, phi, default_s0(phi))
    }

    pub fn tilde(s: f64) -> Result<Self> {
        Self::validated(ConeKind::Tilde, 1.0, s)
    }

    pub fn q(&self) -> f64 {
        q_of_s(self.s)
    }

    fn validated(kind: ConeKind, phi: f64, s: f64) -> Result<Self> {
        if !(phi > 0.0) {
            return Err(LabError::Invalid("Phi must be positive".into()));
        }
        match kind {
            ConeKind::Tilde if !(s > 0.0 && s < 1.0) => {
                Err(LabError::Invalid("Ctilde(s) needs 0 < s < 1".into()))
            }
            _ if s < 0.0 => Err(LabError::Invalid("s must be nonnegative".into())),
            _ => Ok(Self { kind, phi, s }),
        }
    }
}

/// Signed slack of each defining inequality (nonnegative means satisfied).
pub fn cone_margin(b: &FourDBlocks, cone: &ConeSpec) -> Vec<f64> {
    let [a1, a2, a3] = b.a_eig;
    let [c1, c2, c3] = b.c_eig;
    let [_, b2, b3] = b.b_sv;
    let phi = cone.phi;
    let c0 = [
        phi * (a1 + a2) * (c1 + c2) - (b2 + b3).powi(2),
        (phi + 1.0) * (a1 + a2) - (a2 + a3),
        (phi + 1.0) * (c1 + c2) - (c2 + c3),
    ];
    match cone.kind {
        ConeKind::C0 => c0.to_vec(),
        ConeKind::Pinched => {
            let mut v = c0.to_vec();
            v.push(a1 - cone.s * (a1 + a2 + a3));
            v.push(c1 - cone.s * (c1 + c2 + c3));
            v
        }
        ConeKind::Tilde => vec![
            a1 * c1 - cone.s * b3 * b3,
            cone.q() * (a1 + a2) * (c1 + c2) - (b2 + b3).powi(2),
        ],
    }
}

/// Margins divided by the matching power of `max(|tr A|, |tr C|, |B|)`, so that
/// quadratic and linear constraints are compared on one scale.
pub fn normalized_cone_margin(b: &FourDBlocks, cone: &ConeSpec) -> Vec<f64> {
    let scale = b.trace_a().abs().max(b.trace_c().abs()).max(b.b_norm_sq().sqrt());
    if scale == 0.0 {
        return cone_margin(b, cone);
    }
    let degrees: Vec<i32> = match cone.kind {
        ConeKind::C0 => vec![2, 1, 1],
        ConeKind::Pinched => vec![2, 1, 1, 1, 1],
        ConeKind::Tilde => vec![2, 2],
    };
    cone_margin(b, cone)
        .into_iter()
        .zip(degrees)
        .map(|(m, d)| m / scale.powi(d))
        .collect()
}

//! Self-dual / anti-self-dual block form of a four-dimensional curvature operator.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::operator::CurvatureOperator;
use crate::error::{LabError, Result};

/// The blocks `A`, `B`, `C` with sorted spectra.
///
/// Normalization: the operator acts on unit bivectors, so the round unit
/// four-sphere has `A = C = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourDBlocks {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub c: Matrix3<f64>,
    /// eigenvalues of `A`, ascending
    pub a_eig: [f64; 3],
    /// eigenvalues of `C`, ascending
    pub c_eig: [f64; 3],
    /// singular values of `B`, ascending
    pub b_sv: [f64; 3],
}

impl FourDBlocks {
    pub fn new(a: Matrix3<f64>, b: Matrix3<f64>, c: Matrix3<f64>) -> Self {
        let a = 0.5 * (a + a.transpose());
        let c = 0.5 * (c + c.transpose());
        let a_eig = sorted_eigenvalues(&a);
        let c_eig = sorted_eigenvalues(&c);
        let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
        sv.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Self {
            a,
            b,
            c,
            a_eig,
            c_eig,
            b_sv: [sv[0], sv[1], sv[2]],
        }
    }

    pub fn zero() -> Self {
        Self::new(Matrix3::zeros(), Matrix3::zeros(), Matrix3::zeros())
    }

    /// Diagonal blocks from spectra (`B` diagonal with the given entries).
    pub fn diagonal(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Self {
        Self::new(
            Matrix3::from_diagonal(&a.into()),
            Matrix3::from_diagonal(&b.into()),
            Matrix3::from_diagonal(&c.into()),
        )
    }

    pub fn trace_a(&self) -> f64 {
        self.a.trace()
    }

    pub fn trace_c(&self) -> f64 {
        self.c.trace()
    }

    pub fn b_norm_sq(&self) -> f64 {
        self.b.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + 2.0 * self.b.norm_squared() + self.c.norm_squared()).sqrt()
    }

    pub fn report(&self, margins: Vec<f64>) -> BlockReport {
        BlockReport {
            a: self.a_eig,
            b: self.b_sv,
            c: self.c_eig,
            margins,
        }
    }
}

/// Serializable summary of a block decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
    pub margins: Vec<f64>,
}

fn sorted_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let mut ev: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    [ev[0], ev[1], ev[2]]
}

/// Orthonormal bases of the self-dual and anti-self-dual bivectors, as lists
/// of `(coefficient, i, j)` with `i < j`.
fn dual_basis(sign: f64) -> [[(f64, usize, usize); 2]; 3] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [(h, 0, 1), (sign * h, 2, 3)],
        // e1∧e3 + s e4∧e2 = e1∧e3 - s e2∧e4
        [(h, 0, 2), (-sign * h, 1, 3)],
        [(h, 0, 3), (sign * h, 1, 2)],
    ]
}

/// Splits a four-dimensional operator into `A`, `B`, `C` blocks.
pub fn block_decompose_4d(r: &CurvatureOperator) -> Result<FourDBlocks> {
    if r.n() != 4 {
        return Err(LabError::Dimension { got: r.n(), need: "exactly 4" });
    }
    let plus = dual_basis(1.0);
    let minus = dual_basis(-1.0);
    let pair = |x: &[(f64, usize, usize); 2], y: &[(f64, usize, usize); 2]| {
        let mut s = 0.0;
        for &(cx, i, j) in x {
            for &(cy, k, l) in y {
                s += cx * cy * r.get(i, j, k, l);
            }
        }
        s
    };
    let a = Matrix3::from_fn(|p, q| pair(&plus[p], &plus[q]));
    let b = Matrix3::from_fn(|p, q| pair(&plus[p], &minus[q]));
    let c = Matrix3::from_fn(|p, q| pair(&minus[p], &minus[q]));
    Ok(FourDBlocks::new(a, b, c))
}

/// Strict PIC in dimension four: `a1 + a2 > 0` and `c1 + c2 > 0`.
pub fn block_pic_margin(b: &FourDBlocks) -> f64 {
    (b.a_eig[0] + b.a_eig[1]).min(b.c_eig[0] + b.c_eig[1])
}

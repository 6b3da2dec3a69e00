//! Algebraic curvature tensors stored densely as `R[i][j][k][l]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// An algebraic curvature tensor in dimension `n >= 4`.
///
/// Construction always projects onto the space of tensors with the curvature
/// symmetries, so every value of this type satisfies them to rounding error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator", into = "RawOperator")]
pub struct CurvatureOperator {
    n: usize,
    components: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawOperator {
    n: usize,
    components: Vec<f64>,
}

impl TryFrom<RawOperator> for CurvatureOperator {
    type Error = LabError;
    fn try_from(raw: RawOperator) -> Result<Self> {
        CurvatureOperator::from_components(raw.n, raw.components)
    }
}

impl From<CurvatureOperator> for RawOperator {
    fn from(op: CurvatureOperator) -> Self {
        RawOperator {
            n: op.n,
            components: op.components,
        }
    }
}

#[inline]
fn idx(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

impl CurvatureOperator {
    pub fn zero(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            components: vec![0.0; n * n * n * n],
        })
    }

    /// Builds an operator from arbitrary row-major components, projecting onto
    /// curvature tensors: antisymmetrize in each pair, symmetrize the pairs,
    /// then remove the totally antisymmetric part (first Bianchi).
    pub fn from_components(n: usize, components: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if components.len() != n * n * n * n {
            return Err(LabError::Invalid(format!(
                "expected {} components, got {}",
                n * n * n * n,
                components.len()
            )));
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Invalid("non-finite component".into()));
        }
        Ok(Self {
            n,
            components: project(n, &components),
        })
    }

    /// Builds from a closure `f(i, j, k, l)`, then projects.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        check_dim(n)?;
        let mut c = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        c[idx(n, i, j, k, l)] = f(i, j, k, l);
                    }
                }
            }
        }
        Self::from_components(n, c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.components[idx(self.n, i, j, k, l)]
    }

    pub fn scal(&self) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.get(i, j, i, j);
            }
        }
        s
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, l| (0..n).map(|i| self.get(i, j, i, l)).sum())
    }

    pub fn sectional(&self, i: usize, j: usize) -> f64 {
        self.get(i, j, i, j)
    }

    /// `R(a, b, c, d)` for arbitrary vectors.
    pub fn eval(&self, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            let mut si = 0.0;
            for j in 0..n {
                if b[j] == 0.0 {
                    continue;
                }
                let mut sj = 0.0;
                for k in 0..n {
                    let base = idx(n, i, j, k, 0);
                    let row = &self.components[base..base + n];
                    let dot: f64 = row.iter().zip(d).map(|(r, x)| r * x).sum();
                    sj += c[k] * dot;
                }
                si += b[j] * sj;
            }
            total += a[i] * si;
        }
        total
    }

    /// `R(·, b, c, d)` as a vector: the gradient of `R(a, b, c, d)` in `a`.
    pub fn contract_first(&self, b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        let base = idx(n, i, j, k, 0);
                        let row = &self.components[base..base + n];
                        let dot: f64 = row.iter().zip(d).map(|(r, x)| r * x).sum();
                        s += b[j] * c[k] * dot;
                    }
                }
                s
            })
            .collect()
    }

    /// `R_ijkl φ_ij φ_kl` summed over all indices.
    pub fn two_form_value(&self, phi: &DMatrix<f64>) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.get(i, j, k, l) * phi[(i, j)] * phi[(k, l)];
                    }
                }
            }
        }
        s
    }

    /// Largest violation of antisymmetry, pair symmetry and first Bianchi.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs())
                            .max((r + self.get(i, k, l, j) + self.get(i, l, j, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Matrix of the operator on bivectors in the basis `e_i ∧ e_j`, `i < j`.
    pub fn bivector_matrix(&self) -> DMatrix<f64> {
        let pairs = bivector_pairs(self.n);
        let m = pairs.len();
        DMatrix::from_fn(m, m, |p, q| {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            self.get(i, j, k, l)
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            components: self.components.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(LabError::Invalid("dimension mismatch".into()));
        }
        Ok(Self {
            n: self.n,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Pulls the operator back along an orthogonal change of frame `q`:
    /// the result has components `R(q e_i, q e_j, q e_k, q e_l)`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        let n = self.n;
        let cols: Vec<Vec<f64>> = (0..n).map(|c| q.column(c).iter().copied().collect()).collect();
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[idx(n, i, j, k, l)] = self.eval(&cols[i], &cols[j], &cols[k], &cols[l]);
                    }
                }
            }
        }
        Self { n, components: out }
    }
}

/// `(i, j)` pairs with `i < j` in lexicographic order.
pub fn bivector_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

/// Components of `a ∧ b` in the `e_i ∧ e_j` (`i < j`) basis.
pub fn wedge(a: &[f64], b: &[f64]) -> DVector<f64> {
    let n = a.len();
    let pairs = bivector_pairs(n);
    DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| a[i] * b[j] - a[j] * b[i]))
}

fn check_dim(n: usize) -> Result<()> {
    if n < 4 {
        return Err(LabError::Dimension { got: n, need: ">= 4" });
    }
    Ok(())
}

fn project(n: usize, r: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; r.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let anti = 0.25
                        * (r[idx(n, i, j, k, l)] - r[idx(n, j, i, k, l)] - r[idx(n, i, j, l, k)]
                            + r[idx(n, j, i, l, k)]);
                    let pair = 0.25
                        * (r[idx(n, k, l, i, j)] - r[idx(n, l, k, i, j)] - r[idx(n, k, l, j, i)]
                            + r[idx(n, l, k, j, i)]);
                    t[idx(n, i, j, k, l)] = 0.5 * (anti + pair);
                }
            }
        }
    }
    let mut out = vec![0.0; r.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let b = (t[idx(n, i, j, k, l)] + t[idx(n, i, k, l, j)] + t[idx(n, i, l, j, k)])
                        / 3.0;
                    out[idx(n, i, j, k, l)] = t[idx(n, i, j, k, l)] - b;
                }
            }
        }
    }
    out
}

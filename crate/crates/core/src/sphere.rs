//! Exact polynomial calculus on the unit sphere `S^{n-1} ⊂ R^n` and on the
//! cylinder `S^{n-1} × R` (ambient `R^{n+1}`, axis variable last).
//!
//! Every object is an ambient polynomial; intrinsic quantities come from
//! projecting ambient derivatives with `P = I − xxᵀ` on the sphere factor.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ambient {
    Sphere,
    Cylinder,
}

/// `S^{n-1}` or `S^{n-1} × R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub n: usize,
    pub kind: Ambient,
}

impl Space {
    pub fn sphere(n: usize) -> Self {
        Self {
            n,
            kind: Ambient::Sphere,
        }
    }

    pub fn cylinder(n: usize) -> Self {
        Self {
            n,
            kind: Ambient::Cylinder,
        }
    }

    /// Number of ambient coordinates.
    pub fn dim(&self) -> usize {
        match self.kind {
            Ambient::Sphere => self.n,
            Ambient::Cylinder => self.n + 1,
        }
    }

    /// Tangential projector as a polynomial matrix.
    pub fn projector(&self) -> Vec<Vec<Poly>> {
        let d = self.dim();
        let x = |i: usize| Poly::var(d, i);
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i < self.n && j < self.n {
                            let delta = Poly::constant(d, if i == j { 1.0 } else { 0.0 });
                            &delta - &(&x(i) * &x(j))
                        } else if i == j {
                            Poly::constant(d, 1.0)
                        } else {
                            Poly::zero(d)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Projector evaluated at a point of the space.
    pub fn projector_at(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            if i < self.n && j < self.n {
                (if i == j { 1.0 } else { 0.0 }) - x[i] * x[j]
            } else if i == j {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// `vol(S^{n-1}) = 2π^{n/2} / Γ(n/2)`
pub fn sphere_volume(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / libm::tgamma(n as f64 / 2.0)
}

/// `∫_{S^{n-1}} x^α = 2 Π Γ((α_i+1)/2) / Γ((|α|+n)/2)` (zero if any `α_i` is odd).
pub fn monomial_integral(alpha: &[u8]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let n = alpha.len() as f64;
    let total: f64 = alpha.iter().map(|&a| a as f64).sum();
    let mut log = 2f64.ln() - libm::lgamma((total + n) / 2.0);
    for &a in alpha {
        log += libm::lgamma((a as f64 + 1.0) / 2.0);
    }
    log.exp()
}

/// Exact integral of a polynomial in `n` variables over the unit `S^{n-1}`.
pub fn integrate_poly(p: &Poly) -> f64 {
    p.terms().map(|(e, c)| c * monomial_integral(e)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

pub enum Integrand<'a> {
    Poly(&'a Poly),
    Fn {
        n: usize,
        f: &'a dyn Fn(&[f64]) -> f64,
        samples: usize,
        seed: u64,
    },
}

/// Exact for polynomials; seeded Monte Carlo with its standard error otherwise.
pub fn quadrature(integrand: Integrand) -> Estimate {
    match integrand {
        Integrand::Poly(p) => Estimate {
            value: integrate_poly(p),
            error: 0.0,
        },
        Integrand::Fn { n, f, samples, seed } => {
            let pts = sample_sphere(n, samples.max(2), seed);
            let vals: Vec<f64> = pts.iter().map(|x| f(x)).collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let vol = sphere_volume(n);
            Estimate {
                value: vol * mean,
                error: vol * (var / m).sqrt(),
            }
        }
    }
}

/// Seeded uniform points on `S^{n-1}`.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / r).collect()
        })
        .collect()
}

/// `Δ_S f = Δf − D²f[x,x] − (n−1) x·∇f`, valid on the unit sphere.
pub fn sphere_laplacian(f: &Poly) -> Poly {
    slice_laplacian(f, f.nvars())
}

/// Sphere Laplacian in the first `n` variables; any further variables (the
/// cylinder axis) are parameters.
pub fn slice_laplacian(f: &Poly, n: usize) -> Poly {
    let d = f.nvars();
    let x = |i: usize| Poly::var(d, i);
    let mut out = Poly::zero(d);
    for i in 0..n {
        let di = f.deriv(i);
        out = &out + &di.deriv(i);
        out = &out - &(&x(i) * &di).scale(n as f64 - 1.0);
        for j in 0..n {
            out = &out - &(&(&x(i) * &x(j)) * &di.deriv(j));
        }
    }
    out
}

/// Canonical representative on the sphere: every `x_0^k` with `k ≥ 2` is
/// rewritten through `x_0² = 1 − Σ_{i≥1} x_i²` (sphere variables `0..n`), so
/// two polynomials agree on the sphere iff their normal forms agree.
pub fn sphere_normal_form(f: &Poly, n: usize) -> Poly {
    let mut done = Vec::new();
    let mut pending: Vec<(Vec<u8>, f64)> = f.terms().map(|(e, c)| (e.clone(), *c)).collect();
    while let Some((e, c)) = pending.pop() {
        if e[0] < 2 {
            done.push((e, c));
            continue;
        }
        let mut base = e.clone();
        base[0] -= 2;
        pending.push((base.clone(), c));
        for i in 1..n {
            let mut f2 = base.clone();
            f2[i] += 2;
            pending.push((f2, -c));
        }
    }
    Poly::from_terms(f.nvars(), done)
}

// ---------------------------------------------------------------------------
// Harmonics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFunction {
    pub n: usize,
    pub level: usize,
    pub poly: Poly,
    /// eigenvalue of `−Δ_{S^{n-1}}`
    pub eigenvalue: f64,
}

/// `j(j + n − 2)`
pub fn harmonic_eigenvalue(n: usize, level: usize) -> f64 {
    (level * (level + n - 2)) as f64
}

/// L²-orthogonal basis: `1`; `x_i`; `x_i x_j` (i<j) and traceless diagonal
/// combinations `Σ c_k x_k²` with `|c|² = 1/2`, so all level-2 elements share one norm.
pub fn harmonic_basis(n: usize, level: usize) -> Result<Vec<HarmonicFunction>> {
    if n < 2 {
        return Err(LabError::Dimension { got: n, need: ">= 2" });
    }
    let ev = harmonic_eigenvalue(n, level);
    let wrap = |poly: Poly| HarmonicFunction {
        n,
        level,
        poly,
        eigenvalue: ev,
    };
    let x = |i: usize| Poly::var(n, i);
    match level {
        0 => Ok(vec![wrap(Poly::constant(n, 1.0))]),
        1 => Ok((0..n).map(|i| wrap(x(i))).collect()),
        2 => {
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    out.push(wrap(&x(i) * &x(j)));
                }
            }
            for k in 1..n {
                // Helmert contrast (1, …, 1, −k, 0, …) scaled to |c|² = 1/2
                let norm = (0.5 / (k * (k + 1)) as f64).sqrt();
                let mut p = Poly::zero(n);
                for i in 0..k {
                    p = &p + &(&x(i) * &x(i)).scale(norm);
                }
                p = &p - &(&x(k) * &x(k)).scale(k as f64 * norm);
                out.push(wrap(p));
            }
            Ok(out)
        }
        _ => Err(LabError::Invalid("harmonic levels above 2 are not supported".into())),
    }
}

/// L² norms of the level 0, 1, 2 components of `f` and of the remainder.
pub fn level_decomposition(f: &Poly) -> Result<[f64; 4]> {
    let n = f.nvars();
    let mut rest = f.clone();
    let mut norms = [0.0; 4];
    for level in 0..=2 {
        let mut sq = 0.0;
        for u in harmonic_basis(n, level)? {
            let uu = integrate_poly(&(&u.poly * &u.poly));
            let c = integrate_poly(&(f * &u.poly)) / uu;
            sq += c * c * uu;
            rest = &rest - &u.poly.scale(c);
        }
        norms[level] = sq.sqrt();
    }
    norms[3] = integrate_poly(&(&rest * &rest)).max(0.0).sqrt();
    Ok(norms)
}

// ---------------------------------------------------------------------------
// Vector and tensor fields

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub space: Space,
    pub comps: Vec<Poly>,
}

impl VectorField {
    pub fn new(space: Space, comps: Vec<Poly>) -> Result<Self> {
        let d = space.dim();
        if comps.len() != d || comps.iter().any(|p| p.nvars() != d) {
            return Err(LabError::Invalid(format!("field needs {d} components in {d} variables")));
        }
        Ok(Self { space, comps })
    }

    pub fn zero(space: Space) -> Self {
        let d = space.dim();
        Self {
            space,
            comps: vec![Poly::zero(d); d],
        }
    }

    /// `x ↦ Mx` on the sphere factor.
    pub fn rotation(space: Space, m: &DMatrix<f64>) -> Self {
        let d = space.dim();
        let mut comps = vec![Poly::zero(d); d];
        for (i, c) in comps.iter_mut().enumerate().take(space.n) {
            for j in 0..space.n {
                if m[(i, j)] != 0.0 {
                    *c = &*c + &Poly::var(d, j).scale(m[(i, j)]);
                }
            }
        }
        Self { space, comps }
    }

    /// `∂_z` on the cylinder.
    pub fn axial(n: usize) -> Self {
        let space = Space::cylinder(n);
        let mut f = Self::zero(space);
        f.comps[n] = Poly::constant(n + 1, 1.0);
        f
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.comps.len(), self.comps.iter().map(|p| p.eval(x)))
    }

    /// `J[i][j] = ∂_j V_i`
    pub fn jacobian(&self) -> Vec<Vec<Poly>> {
        let d = self.space.dim();
        self.comps.iter().map(|p| (0..d).map(|j| p.deriv(j)).collect()).collect()
    }

    pub fn tangency_defect(&self, x: &[f64]) -> f64 {
        let v = self.eval(x);
        (0..self.space.n).map(|i| x[i] * v[i]).sum::<f64>().abs()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            space: self.space,
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            comps: self.comps.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn mul_poly(&self, f: &Poly) -> Self {
        Self {
            space: self.space,
            comps: self.comps.iter().map(|p| p * f).collect(),
        }
    }

    /// `[V, W] = DW·V − DV·W`
    pub fn lie_bracket(&self, w: &Self) -> Self {
        let d = self.space.dim();
        let comps = (0..d)
            .map(|i| {
                let mut c = Poly::zero(d);
                for j in 0..d {
                    c = &c + &(&w.comps[i].deriv(j) * &self.comps[j]);
                    c = &c - &(&self.comps[i].deriv(j) * &w.comps[j]);
                }
                c
            })
            .collect();
        Self {
            space: self.space,
            comps,
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps.iter().fold(0.0, |a, p| a.max(p.max_abs_coeff()))
    }
}

/// Symmetric 2-tensor field with ambient polynomial entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub space: Space,
    pub comps: Vec<Vec<Poly>>,
}

impl TensorField {
    pub fn zero(space: Space) -> Self {
        let d = space.dim();
        Self {
            space,
            comps: vec![vec![Poly::zero(d); d]; d],
        }
    }

    /// Round metric of radius `r` on the sphere factor (plus `dz²` on the cylinder).
    pub fn round(space: Space, r: f64) -> Self {
        let d = space.dim();
        let mut t = Self::zero(space);
        for i in 0..d {
            t.comps[i][i] = Poly::constant(d, if i < space.n { r * r } else { 1.0 });
        }
        t
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            space: self.space,
            comps: self
                .comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            comps: self.comps.iter().map(|r| r.iter().map(|p| p.scale(s)).collect()).collect(),
        }
    }

    pub fn mul_poly(&self, f: &Poly) -> Self {
        Self {
            space: self.space,
            comps: self.comps.iter().map(|r| r.iter().map(|p| p * f).collect()).collect(),
        }
    }

    /// `P T P`
    pub fn projected(&self) -> Self {
        let p = self.space.projector();
        let d = self.space.dim();
        let pt: Vec<Vec<Poly>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).fold(Poly::zero(d), |acc, k| &acc + &(&p[i][k] * &self.comps[k][j])))
                    .collect()
            })
            .collect();
        let comps = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).fold(Poly::zero(d), |acc, k| &acc + &(&pt[i][k] * &p[k][j])))
                    .collect()
            })
            .collect();
        Self {
            space: self.space,
            comps,
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.space.dim();
        DMatrix::from_fn(d, d, |i, j| self.comps[i][j].eval(x))
    }

    /// Frobenius norm of the tangential part at `x`.
    pub fn norm_at(&self, x: &[f64]) -> f64 {
        let p = self.space.projector_at(x);
        (&p * self.eval(x) * &p).norm()
    }

    /// Precomputed ambient first derivatives for repeated evaluation.
    pub fn derivative(&self) -> TensorDerivative {
        let d = self.space.dim();
        TensorDerivative {
            space: self.space,
            parts: (0..d)
                .map(|c| {
                    Self {
                        space: self.space,
                        comps: self.comps.iter().map(|r| r.iter().map(|p| p.deriv(c)).collect()).collect(),
                    }
                })
                .collect(),
        }
    }

    /// `tr(T) / rank P`, the factor `f` when the tangential part is `f P`.
    pub fn trace_coefficient(&self) -> Poly {
        let d = self.space.dim();
        let tr = (0..d).fold(Poly::zero(d), |acc, i| &acc + &self.comps[i][i]);
        tr.scale(1.0 / (self.space.n as f64 - 1.0 + if self.space.kind == Ambient::Cylinder { 1.0 } else { 0.0 }))
    }
}

pub struct TensorDerivative {
    space: Space,
    parts: Vec<TensorField>,
}

impl TensorDerivative {
    /// Norm of the tangentially projected ambient derivative at `x`.
    pub fn norm_at(&self, x: &[f64]) -> f64 {
        let p = self.space.projector_at(x);
        let d = self.space.dim();
        let slices: Vec<DMatrix<f64>> = self.parts.iter().map(|t| &p * t.eval(x) * &p).collect();
        let mut sq = 0.0;
        for k in 0..d {
            let mut m = DMatrix::zeros(d, d);
            for (c, s) in slices.iter().enumerate() {
                if p[(k, c)] != 0.0 {
                    m += s * p[(k, c)];
                }
            }
            sq += m.norm_squared();
        }
        sq.sqrt()
    }
}

/// `L_V g = P (V·∇G + G·DV + DVᵀ·G) P` for an ambient metric field `G`.
pub fn lie_derivative_metric(v: &VectorField, g: &TensorField) -> Result<TensorField> {
    if v.space != g.space {
        return Err(LabError::Invalid("field and metric live on different spaces".into()));
    }
    let d = v.space.dim();
    let jac = v.jacobian();
    let mut t = TensorField::zero(v.space);
    for i in 0..d {
        for j in 0..d {
            let mut c = Poly::zero(d);
            for k in 0..d {
                c = &c + &(&v.comps[k] * &g.comps[i][j].deriv(k));
                c = &c + &(&g.comps[i][k] * &jac[k][j]);
                c = &c + &(&jac[k][i] * &g.comps[k][j]);
            }
            t.comps[i][j] = c;
        }
    }
    Ok(t.projected())
}

/// `div V = tr(P·DV)` (the sphere factor is unit radius).
pub fn divergence(v: &VectorField) -> Poly {
    let d = v.space.dim();
    let p = v.space.projector();
    let jac = v.jacobian();
    let mut out = Poly::zero(d);
    for i in 0..d {
        for k in 0..d {
            out = &out + &(&p[i][k] * &jac[k][i]);
        }
    }
    out
}

/// `∇_S u = P ∇u` on the unit sphere.
pub fn gradient_field(u: &HarmonicFunction) -> VectorField {
    let n = u.n;
    let space = Space::sphere(n);
    let grad: Vec<Poly> = (0..n).map(|i| u.poly.deriv(i)).collect();
    let radial = (0..n).fold(Poly::zero(n), |acc, i| &acc + &(&Poly::var(n, i) * &grad[i]));
    let comps = (0..n).map(|i| &grad[i] - &(&Poly::var(n, i) * &radial)).collect();
    VectorField { space, comps }
}

/// Pointwise residual of `L_V g_S = (2/(n−1)) div(V) g_S`.
pub fn conformal_killing_residual(v: &VectorField, x: &[f64]) -> Result<f64> {
    let lie = lie_derivative_metric(v, &TensorField::round(v.space, 1.0))?;
    let p = v.space.projector_at(x);
    let div = divergence(v).eval(x);
    Ok((lie.eval(x) - p * (2.0 / (v.space.n as f64 - 1.0) * div)).amax())
}

/// Rough Laplacian `tr ∇²V` of a tangent field on the unit sphere:
/// `P[ΔV − D²V[x,x] − (n−1)·DV·x − 2·DVᵀ·x] − V`.
///
/// On the cylinder this acts slice by slice on the sphere part (the axis is a
/// parameter) and the axial component of the result is zero.
pub fn rough_laplacian(v: &VectorField) -> Result<VectorField> {
    let n = v.space.n;
    let d = v.space.dim();
    let x = |i: usize| Poly::var(d, i);
    let jac = v.jacobian();
    let m = n as f64 - 1.0;
    let w: Vec<Poly> = (0..n)
        .map(|k| {
            let mut c = (0..n).fold(Poly::zero(d), |acc, i| &acc + &jac[k][i].deriv(i));
            for i in 0..n {
                c = &c - &(&x(i) * &jac[k][i]).scale(m);
                c = &c - &(&x(i) * &jac[i][k]).scale(2.0);
                for j in 0..n {
                    c = &c - &(&(&x(i) * &x(j)) * &jac[k][i].deriv(j));
                }
            }
            c
        })
        .collect();
    let radial = (0..n).fold(Poly::zero(d), |acc, i| &acc + &(&x(i) * &w[i]));
    let mut comps: Vec<Poly> = (0..n)
        .map(|k| &(&w[k] - &(&x(k) * &radial)) - &v.comps[k])
        .collect();
    comps.resize(d, Poly::zero(d));
    Ok(VectorField { space: v.space, comps })
}

// ---------------------------------------------------------------------------
// Rotations

/// `½ tr(MᵀM′)`, making `{E_ij}` orthonormal.
pub fn so_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    0.5 * a.component_mul(b).sum()
}

/// `E_ij = e_i e_jᵀ − e_j e_iᵀ`
pub fn elementary_rotation(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m[(j, i)] = -1.0;
    m
}

/// Canonical ordering of `{(i, j) : i < j}`.
pub fn rotation_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `(n ω^{(n+1)/(n−1)} / (2ω))^{1/2}` with `ω = vol(S^{n-1})`: the factor making
/// `area^{−(n+1)/(n−1)} ∫⟨U^a, U^b⟩ = δ_ab` on the unit sphere.
pub fn standard_scale(n: usize) -> f64 {
    let w = sphere_volume(n);
    let nf = n as f64;
    (nf * w.powf((nf + 1.0) / (nf - 1.0)) / (2.0 * w)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationFamily {
    pub n: usize,
    pub mats: Vec<DMatrix<f64>>,
}

impl RotationFamily {
    pub fn canonical(n: usize) -> Self {
        Self {
            n,
            mats: rotation_pairs(n).into_iter().map(|(i, j)| elementary_rotation(n, i, j)).collect(),
        }
    }

    /// `σ^b = Σ_a ω_ab σ̃^a` for orthogonal `ω`, so that `σ̃^a = Σ_b ω_ab σ^b`.
    pub fn conjugated(n: usize, omega: &DMatrix<f64>) -> Result<Self> {
        let canon = Self::canonical(n);
        let big_n = canon.mats.len();
        if omega.nrows() != big_n || omega.ncols() != big_n {
            return Err(LabError::Invalid(format!("omega must be {big_n}×{big_n}")));
        }
        let defect = (omega.transpose() * omega - DMatrix::identity(big_n, big_n)).amax();
        if defect > 1e-10 {
            return Err(LabError::NonOrthonormalFrame { defect });
        }
        let mats = (0..big_n)
            .map(|b| (0..big_n).fold(DMatrix::zeros(n, n), |acc, a| acc + &canon.mats[a] * omega[(a, b)]))
            .collect();
        Ok(Self { n, mats })
    }

    pub fn from_matrices(n: usize, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let f = Self { n, mats };
        let defect = f.orthonormality_defect();
        if f.mats.len() != n * (n - 1) / 2 || defect > 1e-10 {
            return Err(LabError::NonOrthonormalFrame { defect });
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ma) in self.mats.iter().enumerate() {
            worst = worst.max((ma + ma.transpose()).amax());
            for (b, mb) in self.mats.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((so_inner(ma, mb) - target).abs());
            }
        }
        worst
    }

    /// `ω_ab = ⟨σ̃^a, σ^b⟩` relative to the canonical basis.
    pub fn omega(&self) -> DMatrix<f64> {
        let canon = Self::canonical(self.n);
        let big_n = self.len();
        DMatrix::from_fn(big_n, big_n, |a, b| so_inner(&canon.mats[a], &self.mats[b]))
    }

    /// Rotation fields `x ↦ c·σ^a x`.
    pub fn fields(&self, space: Space, scale: f64) -> Vec<VectorField> {
        self.mats.iter().map(|m| VectorField::rotation(space, &(m * scale))).collect()
    }
}

/// Matrix commutator `[A, B] = AB − BA`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Constants `k_abc` (flattened `(a·N + b)·N + c`) with `σ^a = Σ k_abc [σ^b, σ^c]`.
///
/// For the canonical basis each `E_ik` is written as one bracket
/// `[E_ij, E_jk]` with `j` the smallest index outside `{i, k}`; other bases
/// use `k_abc = Σ ω_da ω_eb ω_fc k̃_def`.
pub fn structure_constants(basis: &RotationFamily) -> Result<Vec<f64>> {
    let n = basis.n;
    if n < 3 {
        return Err(LabError::Dimension { got: n, need: ">= 3" });
    }
    let defect = basis.orthonormality_defect();
    if defect > 1e-10 {
        return Err(LabError::NonOrthonormalFrame { defect });
    }
    let pairs = rotation_pairs(n);
    let big_n = pairs.len();
    let index = |i: usize, j: usize| -> (usize, f64) {
        if i < j {
            (pairs.iter().position(|&p| p == (i, j)).unwrap(), 1.0)
        } else {
            (pairs.iter().position(|&p| p == (j, i)).unwrap(), -1.0)
        }
    };
    let mut canon = vec![0.0; big_n * big_n * big_n];
    for (a, &(i, k)) in pairs.iter().enumerate() {
        let j = (0..n).find(|&j| j != i && j != k).unwrap();
        let (b, sb) = index(i, j);
        let (c, sc) = index(j, k);
        canon[(a * big_n + b) * big_n + c] = sb * sc;
    }
    let omega = basis.omega();
    if (&omega - DMatrix::identity(big_n, big_n)).amax() == 0.0 {
        return Ok(canon);
    }
    // contract one index at a time: O(N⁴)
    let contract = |src: &[f64], axis: usize| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for x in 0..big_n {
            for y in 0..big_n {
                for z in 0..big_n {
                    let (mut acc, idx) = (0.0, (x * big_n + y) * big_n + z);
                    for d in 0..big_n {
                        let (src_idx, w) = match axis {
                            0 => ((d * big_n + y) * big_n + z, omega[(d, x)]),
                            1 => ((x * big_n + d) * big_n + z, omega[(d, y)]),
                            _ => ((x * big_n + y) * big_n + d, omega[(d, z)]),
                        };
                        acc += w * src[src_idx];
                    }
                    out[idx] = acc;
                }
            }
        }
        out
    };
    let k = contract(&canon, 0);
    let k = contract(&k, 1);
    Ok(contract(&k, 2))
}

/// `max_a ‖σ^a − Σ k_abc [σ^b, σ^c]‖_∞`
pub fn reconstruction_residual(basis: &RotationFamily, k: &[f64]) -> f64 {
    let big_n = basis.len();
    let mut worst: f64 = 0.0;
    for a in 0..big_n {
        let mut acc = basis.mats[a].clone();
        for b in 0..big_n {
            for c in 0..big_n {
                let kv = k[(a * big_n + b) * big_n + c];
                if kv != 0.0 {
                    acc -= commutator(&basis.mats[b], &basis.mats[c]) * kv;
                }
            }
        }
        worst = worst.max(acc.amax());
    }
    worst
}

// ---------------------------------------------------------------------------
// Alignment and gluing

/// Weighted `z`-slices of the cylinder (a single slice on the sphere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMeasure {
    pub slices: Vec<(f64, f64)>,
}

impl SliceMeasure {
    /// Simpson weights on `[z0, z1]` with an even number of panels.
    pub fn simpson(z0: f64, z1: f64, panels: usize) -> Self {
        let m = (panels.max(2) + 1) & !1;
        let h = (z1 - z0) / m as f64;
        let w = crate::quad::simpson_weights(m, h);
        Self {
            slices: (0..=m).map(|i| (z0 + i as f64 * h, w[i])).collect(),
        }
    }

    /// `∫ ⟨V, W⟩` over the measure, using the flat ambient inner product.
    pub fn inner(&self, v: &VectorField, w: &VectorField) -> f64 {
        let d = v.space.dim();
        let dot = (0..d).fold(Poly::zero(d), |acc, i| &acc + &(&v.comps[i] * &w.comps[i]));
        match v.space.kind {
            Ambient::Sphere => integrate_poly(&dot),
            Ambient::Cylinder => self
                .slices
                .iter()
                .map(|&(z, wt)| wt * integrate_poly(&dot.substitute_last(z)))
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub omega: DMatrix<f64>,
    /// `Σ_a ‖Σ_b ω_ab U^b − Ũ^a‖²`
    pub misfit: f64,
    pub singular_values: Vec<f64>,
    pub rank_deficient: bool,
}

/// Orthogonal `ω` maximizing `Σ_ab ω_ab ⟨U^b, Ũ^a⟩`, from the SVD of the cross
/// Gram matrix `C = U Σ Vᵀ` as `ω = U Vᵀ`; this minimizes the misfit exactly
/// when the `U` family has scalar Gram matrix. Reflections are allowed.
pub fn procrustes_align(u: &[VectorField], ut: &[VectorField], measure: &SliceMeasure) -> Result<Alignment> {
    let big_n = u.len();
    if ut.len() != big_n || big_n == 0 {
        return Err(LabError::Invalid("families must be nonempty and of equal size".into()));
    }
    let cross = DMatrix::from_fn(big_n, big_n, |a, b| measure.inner(&ut[a], &u[b]));
    let svd = cross.clone().svd(true, true);
    let (uu, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let omega = &uu * &vt;
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let top = sv.iter().fold(0.0f64, |a, s| a.max(*s));
    let rank_deficient = sv.iter().any(|s| *s <= 1e-12 * top.max(f64::MIN_POSITIVE));
    let misfit = (0..big_n)
        .map(|a| {
            let diff = (0..big_n).fold(ut[a].scale(-1.0), |acc, b| acc.add(&u[b].scale(omega[(a, b)])));
            measure.inner(&diff, &diff)
        })
        .sum();
    Ok(Alignment {
        omega,
        misfit,
        singular_values: sv,
        rank_deficient,
    })
}

/// Quintic smoothstep transition: `η = 1` for `z <= z0`, `η = 0` for `z >= z1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub z0: f64,
    pub z1: f64,
}

impl Transition {
    pub fn eval(&self, z: f64) -> f64 {
        let u = ((z - self.z0) / (self.z1 - self.z0)).clamp(0.0, 1.0);
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }

    /// `η` on `[z0, z1]` as a polynomial in the cylinder variables.
    pub fn poly(&self, n: usize) -> Poly {
        let d = n + 1;
        let u = (&Poly::var(d, n) - &Poly::constant(d, self.z0)).scale(1.0 / (self.z1 - self.z0));
        let u2 = &u * &u;
        let u3 = &u2 * &u;
        let inner = &(&Poly::constant(d, 10.0) - &u.scale(15.0)) + &u2.scale(6.0);
        &Poly::constant(d, 1.0) - &(&u3 * &inner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluedField {
    pub aligned: VectorField,
    pub target: VectorField,
    pub eta: Transition,
    /// the blend as a polynomial, valid on the transition region
    pub blend: VectorField,
}

impl GluedField {
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        let z = x[self.aligned.space.n];
        if z <= self.eta.z0 {
            self.aligned.eval(x)
        } else if z >= self.eta.z1 {
            self.target.eval(x)
        } else {
            self.blend.eval(x)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Glued {
    pub fields: Vec<GluedField>,
    /// `sup (|L_V g| + |D(L_V g)|)` over transition samples, round unit cylinder
    pub deficit: f64,
}

/// `V^a = η Σ_b ω_ab U^b + (1 − η) Ũ^a` on the cylinder.
pub fn cutoff_glue(
    u: &[VectorField],
    ut: &[VectorField],
    omega: &DMatrix<f64>,
    eta: Transition,
    samples: usize,
    seed: u64,
) -> Result<Glued> {
    let big_n = u.len();
    if ut.len() != big_n || omega.nrows() != big_n || omega.ncols() != big_n {
        return Err(LabError::Invalid("family and omega sizes disagree".into()));
    }
    let space = u[0].space;
    if space.kind != Ambient::Cylinder {
        return Err(LabError::Invalid("gluing needs cylinder fields".into()));
    }
    let n = space.n;
    let e = eta.poly(n);
    let one_minus = &Poly::constant(n + 1, 1.0) - &e;
    let g = TensorField::round(space, 1.0);
    let sphere_pts = sample_sphere(n, samples.max(1), seed);
    let zs: Vec<f64> = (0..=8).map(|k| eta.z0 + (eta.z1 - eta.z0) * k as f64 / 8.0).collect();
    let mut fields = Vec::with_capacity(big_n);
    let mut deficit: f64 = 0.0;
    for a in 0..big_n {
        let aligned = (0..big_n).fold(VectorField::zero(space), |acc, b| acc.add(&u[b].scale(omega[(a, b)])));
        let blend = aligned.mul_poly(&e).add(&ut[a].mul_poly(&one_minus));
        let lie = lie_derivative_metric(&blend, &g)?;
        let dlie = lie.derivative();
        for &z in &zs {
            for p in &sphere_pts {
                let mut x = p.clone();
                x.push(z);
                deficit = deficit.max(lie.norm_at(&x) + dlie.norm_at(&x));
            }
        }
        fields.push(GluedField {
            aligned,
            target: ut[a].clone(),
            eta,
            blend,
        });
    }
    Ok(Glued { fields, deficit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn volumes_and_moments() {
        assert_relative_eq!(sphere_volume(4), 2.0 * std::f64::consts::PI.powi(2), epsilon = 1e-12);
        assert_relative_eq!(sphere_volume(3), 4.0 * std::f64::consts::PI, epsilon = 1e-12);
        for n in 3..7 {
            let vol = sphere_volume(n);
            let mut a = vec![0u8; n];
            a[0] = 2;
            assert_relative_eq!(monomial_integral(&a), vol / n as f64, epsilon = 1e-12);
            a[0] = 4;
            assert_relative_eq!(
                monomial_integral(&a),
                3.0 * vol / (n * (n + 2)) as f64,
                epsilon = 1e-12
            );
            a[0] = 1;
            assert_eq!(monomial_integral(&a), 0.0);
        }
    }

    #[test]
    fn harmonic_counts_and_eigenvalues() {
        assert_eq!(harmonic_basis(4, 1).unwrap().len(), 4);
        let l2 = harmonic_basis(4, 2).unwrap();
        assert_eq!(l2.len(), 9);
        assert_eq!(l2[0].eigenvalue, 8.0);
        for u in &l2 {
            assert!(u.poly.laplacian().is_zero() || u.poly.laplacian().max_abs_coeff() < 1e-14);
            let lap = sphere_laplacian(&u.poly);
            assert!((&lap + &u.poly.scale(8.0)).max_abs_coeff() < 1e-13);
        }
        assert!(harmonic_basis(4, 3).is_err());
    }

    #[test]
    fn level_two_basis_is_orthogonal() {
        let b = harmonic_basis(5, 2).unwrap();
        let norm = integrate_poly(&(&b[0].poly * &b[0].poly));
        for (i, u) in b.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                let ip = integrate_poly(&(&u.poly * &v.poly));
                let target = if i == j { norm } else { 0.0 };
                assert!((ip - target).abs() < 1e-13, "{i} {j} {ip}");
            }
        }
    }

    #[test]
    fn commutator_table() {
        let e = |i, j| elementary_rotation(4, i, j);
        assert_eq!(commutator(&e(0, 1), &e(1, 2)), e(0, 2));
        assert_eq!(commutator(&e(0, 1), &e(0, 2)), -e(1, 2));
    }

    #[test]
    fn constant_has_zero_gradient() {
        let u = &harmonic_basis(4, 0).unwrap()[0];
        assert!(gradient_field(u).comps.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn transition_profile_plateaus() {
        let t = Transition { z0: -1.0, z1: 1.0 };
        assert_eq!(t.eval(-5.0), 1.0);
        assert_eq!(t.eval(5.0), 0.0);
        assert_relative_eq!(t.poly(3).eval(&[0.0, 0.0, 0.0, 0.3]), t.eval(0.3), epsilon = 1e-14);
    }

    #[test]
    fn normal_form_agrees_on_the_sphere() {
        let n = 4;
        let r2 = (0..n).fold(Poly::zero(n + 1), |a, i| &a + &(&Poly::var(n + 1, i) * &Poly::var(n + 1, i)));
        assert_eq!(sphere_normal_form(&r2, n), Poly::constant(n + 1, 1.0));
        let z = Poly::var(n + 1, n);
        let f = &(&(&r2 * &r2) * &Poly::var(n + 1, 0).scale(3.0)) + &(&z * &Poly::var(n + 1, 0));
        let g = sphere_normal_form(&f, n);
        assert!(g.terms().all(|(e, _)| e[0] < 2));
        for x in sample_sphere(n, 20, 3) {
            let mut xz = x.clone();
            xz.push(0.7);
            assert_relative_eq!(f.eval(&xz), g.eval(&xz), epsilon = 1e-13);
        }
    }

    #[test]
    fn slice_laplacian_treats_the_axis_as_a_parameter() {
        let n = 3;
        let x0 = Poly::var(n + 1, 0);
        let z = Poly::var(n + 1, n);
        let f = &(&x0 * &z) * &z;
        let lap = slice_laplacian(&f, n);
        // x_0 has eigenvalue n − 1
        assert_eq!(lap, f.scale(-(n as f64 - 1.0)));
        assert_eq!(sphere_laplacian(&Poly::var(n, 0)), Poly::var(n, 0).scale(-(n as f64 - 1.0)));
    }

    #[test]
    fn rough_laplacian_on_cylinder_ignores_the_axis() {
        let n = 4;
        let m = elementary_rotation(n, 0, 1);
        let sph = rough_laplacian(&VectorField::rotation(Space::sphere(n), &m)).unwrap();
        let cyl = rough_laplacian(&VectorField::rotation(Space::cylinder(n), &m)).unwrap();
        assert!(cyl.comps[n].is_zero());
        for x in sample_sphere(n, 10, 1) {
            let mut xz = x.clone();
            xz.push(-1.3);
            assert!((sph.eval(&x) - cyl.eval(&xz).rows(0, n)).amax() < 1e-14);
            // Killing fields: rough Laplacian = −(n−2) X
            let k = VectorField::rotation(Space::sphere(n), &m).eval(&x);
            assert!((sph.eval(&x) + k * (n as f64 - 2.0)).amax() < 1e-13);
        }
    }
}

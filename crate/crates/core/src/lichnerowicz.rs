//! The parabolic Lichnerowicz equation `∂_t h = Δ_L h` on the shrinking
//! cylinder `ḡ(t) = −2(n−2)t g_{S^{n−1}} + dz²`, in spectral form.
//!
//! A symmetric 2-tensor splits slice by slice as
//! `h = ω g_S + χ + dz⊗σ + σ⊗dz + β dz²`; each eigen-coefficient `c` of these
//! pieces solves `∂_t c = ∂_z² c − e·c/(−t)` for an exponent `e` fixed by its
//! kind and eigenvalue, so `(−t)^{−e} c` solves the heat equation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::heat::{fd_solve, HeatGrid, HeatProblem};
use crate::poly::Poly;
use crate::sphere::{
    elementary_rotation, gradient_field, harmonic_basis, harmonic_eigenvalue, integrate_poly,
    lie_derivative_metric, rotation_pairs, rough_laplacian, slice_laplacian, sphere_normal_form, Ambient, Space, TensorField,
    VectorField,
};
use crate::warped::reference_time;

fn radius_sq(n: usize, t: f64) -> Result<f64> {
    if t >= 0.0 {
        return Err(LabError::NonNegativeTime { t });
    }
    Ok(-2.0 * (n as f64 - 2.0) * t)
}

/// `(n−1)/(2(n−2))`, the exponent of the growing first-harmonic mode.
pub fn growing_exponent(n: usize) -> f64 {
    (n as f64 - 1.0) / (2.0 * (n as f64 - 2.0))
}

/// `−(n−3)/(2(n−2))`, the `ḡ(t)`-norm exponent of the growing mode.
pub fn growing_norm_exponent(n: usize) -> f64 {
    -(n as f64 - 3.0) / (2.0 * (n as f64 - 2.0))
}

// ---------------------------------------------------------------------------
// Modes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    Omega,
    Chi,
    Sigma,
    Beta,
}

impl ModeKind {
    pub const ALL: [ModeKind; 4] = [ModeKind::Omega, ModeKind::Chi, ModeKind::Sigma, ModeKind::Beta];

    pub fn index(self) -> usize {
        match self {
            ModeKind::Omega => 0,
            ModeKind::Chi => 1,
            ModeKind::Sigma => 2,
            ModeKind::Beta => 3,
        }
    }
}

/// A component kind together with its angular eigenvalue: `λ` of `−Δ_S` for
/// `ω, β`, `μ` of the rough Laplacian for `σ`, `ν` for `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub n: usize,
    pub kind: ModeKind,
    pub eigenvalue: f64,
}

impl ModeSpec {
    pub fn new(n: usize, kind: ModeKind, eigenvalue: f64) -> Result<Self> {
        if n < 4 {
            return Err(LabError::Dimension { got: n, need: ">= 4" });
        }
        let m = n as f64;
        let ok = eigenvalue.is_finite()
            && match kind {
                ModeKind::Omega | ModeKind::Beta => eigenvalue == 0.0 || eigenvalue >= m - 1.0,
                ModeKind::Sigma => eigenvalue >= 1.0,
                ModeKind::Chi => eigenvalue >= 2.0,
            };
        if !ok {
            return Err(LabError::Invalid(format!("eigenvalue {eigenvalue} is outside the {kind:?} spectrum bound")));
        }
        Ok(Self { n, kind, eigenvalue })
    }

    /// Scalar mode at harmonic level `level`.
    pub fn harmonic(n: usize, kind: ModeKind, level: usize) -> Result<Self> {
        Self::new(n, kind, harmonic_eigenvalue(n, level))
    }

    /// `λ̄ = λ/(2(n−2))`, `μ̄ = μ/(2(n−2))`, `ν̄ = (ν+2)/(2(n−2))`.
    pub fn shifted(&self) -> f64 {
        let d = 2.0 * (self.n as f64 - 2.0);
        match self.kind {
            ModeKind::Chi => (self.eigenvalue + 2.0) / d,
            _ => self.eigenvalue / d,
        }
    }

    /// Exponent `e` with `(−t)^{−e} c` caloric.
    pub fn exponent(&self) -> f64 {
        match self.kind {
            ModeKind::Omega | ModeKind::Beta => self.shifted(),
            ModeKind::Sigma => self.shifted() + 0.5,
            ModeKind::Chi => self.shifted() + 1.0,
        }
    }

    /// Converts `|c|` times the `g_S`-sup of the angular factor into a `ḡ(t)` norm.
    pub fn weight(&self, t: f64) -> Result<f64> {
        let r2 = radius_sq(self.n, t)?;
        Ok(match self.kind {
            ModeKind::Omega => (self.n as f64 - 1.0).sqrt() / r2,
            ModeKind::Chi => 1.0 / r2,
            ModeKind::Sigma => (2.0 / r2).sqrt(),
            ModeKind::Beta => 1.0,
        })
    }

    /// Right-hand side `c_zz − e c/(−t)`.
    pub fn rhs(&self, c: f64, c_zz: f64, t: f64) -> f64 {
        c_zz - self.exponent() * c / (-t)
    }
}

/// Mode values on a uniform `(z, t)` grid; row `j` is time `t[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub mode: ModeSpec,
    pub z: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ModeCoefficient {
    pub fn last(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        let mut rows = Vec::with_capacity(self.z.len() * self.t.len());
        for (j, t) in self.t.iter().enumerate() {
            for (i, z) in self.z.iter().enumerate() {
                rows.push([*z, *t, self.values[j][i]]);
            }
        }
        rows
    }

    /// Largest `ḡ(t)`-weighted magnitude on row `j`.
    pub fn weighted_sup(&self, j: usize) -> Result<f64> {
        let w = self.mode.weight(self.t[j])?;
        Ok(self.values[j].iter().fold(0.0, |a, v| a.max(w * v.abs())))
    }
}

/// Initial data at the first grid time and Dirichlet data at `z = ±l`.
pub struct ModeData<'a> {
    pub l: f64,
    pub initial: &'a dyn Fn(f64) -> f64,
    pub left: &'a dyn Fn(f64) -> f64,
    pub right: &'a dyn Fn(f64) -> f64,
}

fn check_past(grid: &HeatGrid) -> Result<()> {
    if grid.t1 >= 0.0 {
        return Err(LabError::NonNegativeTime { t: grid.t1 });
    }
    Ok(())
}

/// Evolves one coefficient by the caloric substitution `ĉ = (−t)^{−e} c`,
/// Crank–Nicolson on `ĉ`, and multiplication back.
pub fn mode_evolve(mode: ModeSpec, data: &ModeData, grid: HeatGrid) -> Result<ModeCoefficient> {
    check_past(&grid)?;
    let e = mode.exponent();
    let t0 = grid.t0;
    let init = |z: f64| (-t0).powf(-e) * (data.initial)(z);
    let left = |t: f64| (-t).powf(-e) * (data.left)(t);
    let right = |t: f64| (-t).powf(-e) * (data.right)(t);
    let p = HeatProblem::new(data.l, &init, &left, &right)?;
    let f = fd_solve(&p, grid)?;
    let values = f
        .values
        .iter()
        .zip(&f.t)
        .map(|(row, t)| {
            let s = (-t).powf(e);
            row.iter().map(|v| v * s).collect()
        })
        .collect();
    Ok(ModeCoefficient {
        mode,
        z: f.z,
        t: f.t,
        values,
    })
}

/// Forward Euler on the mode equation itself, potential term included, with
/// `dt ≤ dz²/4`.
pub fn mode_evolve_direct(mode: ModeSpec, data: &ModeData, grid: HeatGrid) -> Result<ModeCoefficient> {
    check_past(&grid)?;
    if grid.nz < 2 || grid.nt < 1 || !(grid.t1 > grid.t0) || !(data.l > 0.0) {
        return Err(LabError::Invalid("mode grid needs nz >= 2, nt >= 1, t1 > t0 and l > 0".into()));
    }
    let e = mode.exponent();
    let nz = grid.nz;
    let dz = 2.0 * data.l / nz as f64;
    let z: Vec<f64> = (0..=nz).map(|i| -data.l + i as f64 * dz).collect();
    let dt_out = (grid.t1 - grid.t0) / grid.nt as f64;
    let sub = (dt_out / (0.25 * dz * dz)).ceil().max(1.0) as usize;
    let dt = dt_out / sub as f64;
    let mut c: Vec<f64> = z.iter().map(|&x| (data.initial)(x)).collect();
    c[0] = (data.left)(grid.t0);
    c[nz] = (data.right)(grid.t0);
    let mut ts = vec![grid.t0];
    let mut values = vec![c.clone()];
    let mut next = c.clone();
    for j in 1..=grid.nt {
        for k in 0..sub {
            let t = grid.t0 + (j - 1) as f64 * dt_out + k as f64 * dt;
            for i in 1..nz {
                let czz = ((c[i + 1] + c[i - 1]) - 2.0 * c[i]) / (dz * dz);
                next[i] = c[i] + dt * (czz - e * c[i] / (-t));
            }
            let t_new = t + dt;
            next[0] = (data.left)(t_new);
            next[nz] = (data.right)(t_new);
            std::mem::swap(&mut c, &mut next);
        }
        ts.push(grid.t0 + j as f64 * dt_out);
        values.push(c.clone());
    }
    Ok(ModeCoefficient {
        mode,
        z,
        t: ts,
        values,
    })
}

// ---------------------------------------------------------------------------
// Decomposition

/// Eigen-families of tangent fields used for `σ`: gradients of first
/// harmonics (`μ = 1`), Killing fields (`μ = n−2`) and gradients of second
/// harmonics (`μ = n+2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneFormFamily {
    Gradient1,
    Killing,
    Gradient2,
}

impl OneFormFamily {
    pub const ALL: [OneFormFamily; 3] = [OneFormFamily::Gradient1, OneFormFamily::Killing, OneFormFamily::Gradient2];

    pub fn eigenvalue(self, n: usize) -> f64 {
        match self {
            OneFormFamily::Gradient1 => 1.0,
            OneFormFamily::Killing => n as f64 - 2.0,
            OneFormFamily::Gradient2 => n as f64 + 2.0,
        }
    }

    /// Fields on the unit sphere spanning the family, in the order of
    /// `harmonic_basis` and `rotation_pairs`.
    pub fn fields(self, n: usize) -> Result<Vec<VectorField>> {
        Ok(match self {
            OneFormFamily::Gradient1 => harmonic_basis(n, 1)?.iter().map(gradient_field).collect(),
            OneFormFamily::Gradient2 => harmonic_basis(n, 2)?.iter().map(gradient_field).collect(),
            OneFormFamily::Killing => rotation_pairs(n)
                .into_iter()
                .map(|(i, j)| VectorField::rotation(Space::sphere(n), &elementary_rotation(n, i, j)))
                .collect(),
        })
    }
}

struct Catalog {
    n: usize,
    harmonics: Vec<Vec<(Poly, f64)>>,
    families: Vec<Vec<(Vec<Poly>, f64)>>,
    projector: Vec<Vec<Poly>>,
}

fn dot(a: &[Poly], b: &[Poly]) -> Poly {
    a.iter().zip(b).fold(Poly::zero(a[0].nvars()), |acc, (x, y)| &acc + &(x * y))
}

impl Catalog {
    fn new(n: usize) -> Result<Self> {
        let mut harmonics = Vec::new();
        for level in 0..=2 {
            harmonics.push(
                harmonic_basis(n, level)?
                    .into_iter()
                    .map(|u| {
                        let nn = integrate_poly(&(&u.poly * &u.poly));
                        (u.poly, nn)
                    })
                    .collect(),
            );
        }
        let mut families = Vec::new();
        for fam in OneFormFamily::ALL {
            families.push(
                fam.fields(n)?
                    .into_iter()
                    .map(|v| {
                        let nn = integrate_poly(&dot(&v.comps, &v.comps));
                        (v.comps, nn)
                    })
                    .collect(),
            );
        }
        Ok(Self {
            n,
            harmonics,
            families,
            projector: Space::sphere(n).projector(),
        })
    }

    fn levels(&self, f: &Poly) -> LevelCoefficients {
        let mut rest = f.clone();
        let levels = self
            .harmonics
            .iter()
            .map(|basis| {
                basis
                    .iter()
                    .map(|(u, nn)| {
                        let c = integrate_poly(&(f * u)) / nn;
                        rest = &rest - &u.scale(c);
                        c
                    })
                    .collect()
            })
            .collect();
        LevelCoefficients {
            levels,
            rest: sphere_normal_form(&rest, self.n),
        }
    }

    fn one_forms(&self, s: &[Poly]) -> SigmaCoefficients {
        let mut rest = s.to_vec();
        let families = self
            .families
            .iter()
            .map(|fam| {
                fam.iter()
                    .map(|(w, nn)| {
                        let c = integrate_poly(&dot(s, w)) / nn;
                        for (r, wi) in rest.iter_mut().zip(w) {
                            *r = &*r - &wi.scale(c);
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        SigmaCoefficients {
            families,
            rest: rest.iter().map(|r| sphere_normal_form(r, self.n)).collect(),
        }
    }
}

/// Coefficients against `harmonic_basis` at levels 0, 1, 2 and the orthogonal remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCoefficients {
    pub levels: Vec<Vec<f64>>,
    pub rest: Poly,
}

impl LevelCoefficients {
    pub fn reconstruct(&self, n: usize) -> Result<Poly> {
        let mut p = self.rest.clone();
        for (level, coeffs) in self.levels.iter().enumerate() {
            for (u, c) in harmonic_basis(n, level)?.iter().zip(coeffs) {
                p = &p + &u.poly.scale(*c);
            }
        }
        Ok(p)
    }
}

/// Coefficients against the three `OneFormFamily` catalogs and the remainder field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCoefficients {
    pub families: Vec<Vec<f64>>,
    pub rest: Vec<Poly>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDecomposition {
    pub z: f64,
    pub omega: LevelCoefficients,
    pub beta: LevelCoefficients,
    pub sigma: SigmaCoefficients,
    /// tracefree tangential part, `n × n` polynomials on the sphere
    pub chi: Vec<Vec<Poly>>,
    pub omega_poly: Poly,
    pub beta_poly: Poly,
    pub sigma_field: Vec<Poly>,
}

impl SliceDecomposition {
    /// Slice mean `ω̄`.
    pub fn omega_bar(&self) -> f64 {
        self.omega.levels[0][0]
    }

    /// Slice mean `β̄`.
    pub fn beta_bar(&self) -> f64 {
        self.beta.levels[0][0]
    }

    /// First-harmonic `ω` coefficients against `x_1, …, x_n`.
    pub fn psi(&self) -> &[f64] {
        &self.omega.levels[1]
    }

    /// `L²` norm of `χ` over the slice.
    pub fn chi_norm(&self) -> f64 {
        let sq = self
            .chi
            .iter()
            .flatten()
            .fold(Poly::zero(self.omega_poly.nvars()), |acc, p| &acc + &(p * p));
        integrate_poly(&sq).max(0.0).sqrt()
    }

    /// Largest `L²` norm among the unresolved remainders of `ω`, `β`, `σ`.
    pub fn unresolved(&self) -> f64 {
        let l2 = |p: &Poly| integrate_poly(&(p * p)).max(0.0).sqrt();
        let s = integrate_poly(&dot(&self.sigma.rest, &self.sigma.rest)).max(0.0).sqrt();
        l2(&self.omega.rest).max(l2(&self.beta.rest)).max(s)
    }

    /// `ω P + χ + dz⊗σ + σ⊗dz + β dz²` rebuilt from coefficients and remainders.
    pub fn reassemble(&self, n: usize) -> Result<Vec<Vec<Poly>>> {
        let omega = self.omega.reconstruct(n)?;
        let beta = self.beta.reconstruct(n)?;
        let mut sigma = self.sigma.rest.clone();
        for (fam, coeffs) in OneFormFamily::ALL.iter().zip(&self.sigma.families) {
            for (w, c) in fam.fields(n)?.iter().zip(coeffs) {
                for (s, wi) in sigma.iter_mut().zip(&w.comps) {
                    *s = &*s + &wi.scale(*c);
                }
            }
        }
        let p = Space::sphere(n).projector();
        let mut out = vec![vec![Poly::zero(n); n + 1]; n + 1];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = &(&omega * &p[i][j]) + &self.chi[i][j];
            }
            out[i][n] = sigma[i].clone();
            out[n][i] = sigma[i].clone();
        }
        out[n][n] = beta;
        Ok(out)
    }

    /// Every resolved eigen-coefficient with its mode.
    pub fn modes(&self, n: usize) -> Result<Vec<(ModeSpec, f64)>> {
        let mut out = Vec::new();
        for (kind, lc) in [(ModeKind::Omega, &self.omega), (ModeKind::Beta, &self.beta)] {
            for (level, coeffs) in lc.levels.iter().enumerate() {
                let mode = ModeSpec::harmonic(n, kind, level)?;
                out.extend(coeffs.iter().map(|c| (mode, *c)));
            }
        }
        for (fam, coeffs) in OneFormFamily::ALL.iter().zip(&self.sigma.families) {
            let mode = ModeSpec::new(n, ModeKind::Sigma, fam.eigenvalue(n))?;
            out.extend(coeffs.iter().map(|c| (mode, *c)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDecomposition {
    pub n: usize,
    pub slices: Vec<SliceDecomposition>,
}

impl TensorDecomposition {
    /// Largest entry of reassembled minus projected input over `points` (on the sphere).
    pub fn reassembly_defect(&self, h: &TensorField, points: &[Vec<f64>]) -> Result<f64> {
        let n = self.n;
        let proj = h.projected();
        let mut worst = 0.0f64;
        for s in &self.slices {
            let r = s.reassemble(n)?;
            for x in points {
                let mut xz = x.clone();
                xz.push(s.z);
                for i in 0..=n {
                    for j in 0..=n {
                        worst = worst.max((r[i][j].eval(x) - proj.comps[i][j].eval(&xz)).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Polynomial degree above which a slice is rejected.
pub const MAX_DEGREE: usize = 8;

/// Splits `h` (a polynomial tensor on the cylinder) on each slice `z ∈ slices`
/// by exact spherical quadrature.
pub fn decompose(h: &TensorField, slices: &[f64]) -> Result<TensorDecomposition> {
    if h.space.kind != Ambient::Cylinder {
        return Err(LabError::Invalid("decomposition needs a tensor on the cylinder".into()));
    }
    let n = h.space.n;
    if n < 4 {
        return Err(LabError::Dimension { got: n, need: ">= 4" });
    }
    if h.comps.iter().flatten().any(|p| p.degree() > MAX_DEGREE) {
        return Err(LabError::Invalid(format!("polynomial degree above {MAX_DEGREE} is not supported")));
    }
    let cat = Catalog::new(n)?;
    let slices = slices
        .iter()
        .map(|&z| {
            let hs: Vec<Vec<Poly>> = h
                .comps
                .iter()
                .map(|row| row.iter().map(|p| p.substitute_last(z)).collect())
                .collect();
            decompose_slice(&cat, &hs, z)
        })
        .collect();
    Ok(TensorDecomposition { n, slices })
}

fn decompose_slice(cat: &Catalog, hs: &[Vec<Poly>], z: f64) -> SliceDecomposition {
    let n = cat.n;
    let p = &cat.projector;
    let zero = Poly::zero(n);
    let ph: Vec<Vec<Poly>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(zero.clone(), |a, k| &a + &(&p[i][k] * &hs[k][j]))).collect())
        .collect();
    let t: Vec<Vec<Poly>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(zero.clone(), |a, k| &a + &(&ph[i][k] * &p[k][j]))).collect())
        .collect();
    let nf = |f: &Poly| sphere_normal_form(f, n);
    let omega_poly = nf(&(0..n).fold(zero.clone(), |a, i| &a + &t[i][i]).scale(1.0 / (n as f64 - 1.0)));
    let chi = (0..n)
        .map(|i| (0..n).map(|j| nf(&(&t[i][j] - &(&omega_poly * &p[i][j])))).collect())
        .collect();
    let sigma_field: Vec<Poly> = (0..n)
        .map(|i| {
            (0..n).fold(zero.clone(), |a, j| {
                let hz = (&hs[j][n] + &hs[n][j]).scale(0.5);
                &a + &(&p[i][j] * &hz)
            })
        })
        .map(|f| nf(&f))
        .collect();
    let beta_poly = nf(&hs[n][n]);
    SliceDecomposition {
        z,
        omega: cat.levels(&omega_poly),
        beta: cat.levels(&beta_poly),
        sigma: cat.one_forms(&sigma_field),
        chi,
        omega_poly,
        beta_poly,
        sigma_field,
    }
}

// ---------------------------------------------------------------------------
// Norms

/// `|h|_{ḡ(t)}` at the cylinder point `(x, z)`.
pub fn metric_norm(h: &TensorField, z: f64, t: f64, x: &[f64]) -> Result<f64> {
    let n = h.space.n;
    let r = radius_sq(n, t)?.sqrt();
    let mut xz = x.to_vec();
    xz.push(z);
    let p = h.space.projector_at(&xz);
    let d = DMatrix::from_fn(n + 1, n + 1, |i, j| if i != j { 0.0 } else if i < n { 1.0 / r } else { 1.0 });
    Ok((&d * &p * h.eval(&xz) * &p * &d).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    /// sup of `|h|_{ḡ(t)}` over the sample points
    pub metric: f64,
    /// sups of `|ω|/(−t)`, `|χ|/(−t)`, `|σ|/(−t)^{1/2}`, `|β|`
    pub components: [f64; 4],
    /// comparability constants: `lower·S ≤ |h| ≤ upper·S` for the component sum `S`
    pub lower: f64,
    pub upper: f64,
    pub comparable: bool,
}

/// `ḡ(t)`-norm of a decomposed slice and its weighted components, sampled at
/// `points` on the unit sphere.
pub fn weighted_norm(d: &SliceDecomposition, n: usize, t: f64, points: &[Vec<f64>]) -> Result<WeightedNorm> {
    let r2 = radius_sq(n, t)?;
    let m = n as f64;
    let a = [
        (m - 1.0).sqrt() / (2.0 * (m - 2.0)),
        1.0 / (2.0 * (m - 2.0)),
        1.0 / (m - 2.0).sqrt(),
        1.0,
    ];
    let lower = a.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    let upper = a.iter().cloned().fold(0.0, f64::max);
    let mut out = WeightedNorm {
        metric: 0.0,
        components: [0.0; 4],
        lower,
        upper,
        comparable: true,
    };
    for x in points {
        let w = d.omega_poly.eval(x);
        let chi = d.chi.iter().flatten().map(|p| p.eval(x).powi(2)).sum::<f64>();
        let s = d.sigma_field.iter().map(|p| p.eval(x).powi(2)).sum::<f64>();
        let b = d.beta_poly.eval(x);
        let metric = ((m - 1.0) * w * w / (r2 * r2) + chi / (r2 * r2) + 2.0 * s / r2 + b * b).sqrt();
        let comps = [w.abs() / (-t), chi.sqrt() / (-t), s.sqrt() / (-t).sqrt(), b.abs()];
        let sum: f64 = comps.iter().sum();
        let tol = 1e-12 * (1.0 + sum);
        if metric < lower * sum - tol || metric > upper * sum + tol {
            out.comparable = false;
        }
        out.metric = out.metric.max(metric);
        for (o, c) in out.components.iter_mut().zip(comps) {
            *o = o.max(c);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mode-system residuals

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResidual {
    /// largest `|∂_t c − ∂_z² c + e c/(−t)|` per kind (`χ` reports its slice norm)
    pub by_kind: [f64; 4],
    /// largest remainder norm not captured by the catalogs
    pub unresolved: f64,
}

impl SystemResidual {
    pub fn max(&self) -> f64 {
        self.by_kind.iter().cloned().fold(self.unresolved, f64::max)
    }
}

/// Finite-difference residual of the mode system for a tensor family
/// `h(z, t)` (a cylinder tensor valid near the slice `z`), with fourth-order
/// stencils of width `step`. The `χ` entry is the slice norm of `χ`, which
/// must vanish for the families this is applied to.
pub fn mode_system_residual(
    n: usize,
    h: &dyn Fn(f64, f64) -> Result<TensorField>,
    z: f64,
    t: f64,
    step: f64,
) -> Result<SystemResidual> {
    if t + 2.0 * step >= 0.0 {
        return Err(LabError::NonNegativeTime { t: t + 2.0 * step });
    }
    let sample = |zz: f64, tt: f64| -> Result<SliceDecomposition> {
        let d = decompose(&h(zz, tt)?, &[zz])?;
        Ok(d.slices.into_iter().next().unwrap())
    };
    let center = sample(z, t)?;
    let modes = center.modes(n)?;
    let vals = |s: &SliceDecomposition| -> Result<Vec<f64>> { Ok(s.modes(n)?.into_iter().map(|m| m.1).collect()) };
    let mut zs = Vec::new();
    let mut ts = Vec::new();
    for k in [-2.0, -1.0, 1.0, 2.0] {
        zs.push(vals(&sample(z + k * step, t)?)?);
        ts.push(vals(&sample(z, t + k * step)?)?);
    }
    let mut by_kind = [0.0f64; 4];
    for (i, (mode, c)) in modes.iter().enumerate() {
        let c_t = (ts[0][i] - 8.0 * ts[1][i] + 8.0 * ts[2][i] - ts[3][i]) / (12.0 * step);
        let c_zz = (-zs[0][i] + 16.0 * zs[1][i] - 30.0 * c + 16.0 * zs[2][i] - zs[3][i]) / (12.0 * step * step);
        let k = mode.kind.index();
        by_kind[k] = by_kind[k].max((c_t - mode.rhs(*c, c_zz, t)).abs());
    }
    by_kind[ModeKind::Chi.index()] = center.chi_norm();
    Ok(SystemResidual {
        by_kind,
        unresolved: center.unresolved(),
    })
}

/// The non-decaying solutions: constant `ω̄ g_S`, constant `β̄ dz²`, and the
/// growing mode `(−t)^{(n−1)/(2(n−2))} ψ g_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NeutralSolution {
    Omega(f64),
    Beta(f64),
    Growing(Vec<f64>),
}

impl NeutralSolution {
    pub fn tensor(&self, n: usize, t: f64) -> Result<TensorField> {
        let space = Space::cylinder(n);
        let d = n + 1;
        let mut h = TensorField::zero(space);
        match self {
            NeutralSolution::Omega(c) => {
                for i in 0..n {
                    h.comps[i][i] = Poly::constant(d, *c);
                }
            }
            NeutralSolution::Beta(c) => h.comps[n][n] = Poly::constant(d, *c),
            NeutralSolution::Growing(psi) => {
                if psi.len() != n {
                    return Err(LabError::Invalid(format!("psi needs {n} entries")));
                }
                radius_sq(n, t)?;
                let f = first_harmonic(psi, d).scale((-t).powf(growing_exponent(n)));
                for i in 0..n {
                    h.comps[i][i] = f.clone();
                }
            }
        }
        Ok(h.projected())
    }
}

fn first_harmonic(psi: &[f64], nvars: usize) -> Poly {
    psi.iter()
        .enumerate()
        .fold(Poly::zero(nvars), |acc, (i, c)| &acc + &Poly::var(nvars, i).scale(*c))
}

// ---------------------------------------------------------------------------
// Vector fields

/// `X ↦ (1/(−2(n−2)t))(Δ_S + (n−2))X_S + ∂_z² X_S` on the sphere part and
/// `(1/(−2(n−2)t)) Δ_S X_z + ∂_z² X_z` on the axial part; this is
/// `Δ_{ḡ} X + Ric_{ḡ}(X)`.
pub fn vector_heat_operator(x: &VectorField, t: f64) -> Result<VectorField> {
    if x.space.kind != Ambient::Cylinder {
        return Err(LabError::Invalid("vector heat operator acts on cylinder fields".into()));
    }
    let n = x.space.n;
    let r2 = radius_sq(n, t)?;
    let rl = rough_laplacian(x)?;
    let mut comps = Vec::with_capacity(n + 1);
    for k in 0..n {
        let s = &rl.comps[k] + &x.comps[k].scale(n as f64 - 2.0);
        comps.push(&s.scale(1.0 / r2) + &x.comps[k].deriv(n).deriv(n));
    }
    comps.push(&slice_laplacian(&x.comps[n], n).scale(1.0 / r2) + &x.comps[n].deriv(n).deriv(n));
    VectorField::new(x.space, comps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalKillingRemoval {
    pub n: usize,
    pub t: f64,
    pub xi: VectorField,
    pub k: TensorField,
    /// `(n−3)/(−2(n−2)t)`
    pub bochner_eigenvalue: f64,
}

impl ConformalKillingRemoval {
    /// Largest entry of `L_ξ ḡ(t) − k` over `points` on the sphere (slice `z = 0`).
    pub fn lie_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let g = TensorField::round(Space::cylinder(self.n), radius_sq(self.n, self.t)?.sqrt());
        let diff = lie_derivative_metric(&self.xi, &g)?.add(&self.k.scale(-1.0));
        Ok(points.iter().map(|x| diff.eval(&with_axis(x, 0.0)).amax()).fold(0.0, f64::max))
    }

    /// Largest entry of `Δξ + Ric(ξ) − eigenvalue·ξ` over `points`.
    pub fn bochner_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let diff = vector_heat_operator(&self.xi, self.t)?.add(&self.xi.scale(-self.bochner_eigenvalue));
        Ok(points.iter().map(|x| diff.eval(&with_axis(x, 0.0)).amax()).fold(0.0, f64::max))
    }
}

fn with_axis(x: &[f64], z: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    v.push(z);
    v
}

/// `ξ = −(1/(4(n−2)))(−t)^{−(n−3)/(2(n−2))} ∇_S ψ`, whose Lie derivative of
/// `ḡ(t)` is the growing mode `(−t)^{(n−1)/(2(n−2))} ψ g_S`.
pub fn conformal_killing_removal(n: usize, psi: &[f64], t: f64) -> Result<ConformalKillingRemoval> {
    if n < 4 {
        return Err(LabError::Dimension { got: n, need: ">= 4" });
    }
    if psi.len() != n {
        return Err(LabError::Invalid(format!("psi needs {n} entries")));
    }
    let r2 = radius_sq(n, t)?;
    let d = n + 1;
    let m = n as f64;
    let coef = -(-t).powf(growing_norm_exponent(n)) / (4.0 * (m - 2.0));
    let f = first_harmonic(psi, d);
    let mut comps: Vec<Poly> = (0..n)
        .map(|i| (&Poly::constant(d, psi[i]) - &(&Poly::var(d, i) * &f)).scale(coef))
        .collect();
    comps.push(Poly::zero(d));
    let xi = VectorField::new(Space::cylinder(n), comps)?;
    let mut k = TensorField::zero(Space::cylinder(n));
    let g = f.scale((-t).powf(growing_exponent(n)));
    for i in 0..n {
        k.comps[i][i] = g.clone();
    }
    Ok(ConformalKillingRemoval {
        n,
        t,
        xi,
        k: k.projected(),
        bochner_eigenvalue: (m - 3.0) / r2,
    })
}

/// `constant + Σ a e^{−k²t} cos(kz + φ)`, an exact heat solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigHeat {
    pub constant: f64,
    /// `[amplitude, wavenumber, phase]`
    pub waves: Vec<[f64; 3]>,
}

impl TrigHeat {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            waves: Vec::new(),
        }
    }

    pub fn random(rng: &mut impl Rng, waves: usize) -> Self {
        Self {
            constant: rng.gen_range(-1.0..1.0),
            waves: (0..waves)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0) / waves as f64,
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    ]
                })
                .collect(),
        }
    }

    /// `∂_z^order` at `(z, t)`; `∂_t = ∂_z²`.
    pub fn dz(&self, z: f64, t: f64, order: u32) -> f64 {
        let mut v = if order == 0 { self.constant } else { 0.0 };
        for [a, k, p] in &self.waves {
            v += a
                * (-k * k * t).exp()
                * k.powi(order as i32)
                * (k * z + p + order as f64 * std::f64::consts::FRAC_PI_2).cos();
        }
        v
    }

    pub fn eval(&self, z: f64, t: f64) -> f64 {
        self.dz(z, t, 0)
    }
}

/// Solution of `∂_t V = Δ_{ḡ} V + Ric(V)` built from level-≤1 pieces:
/// `V = b·Mx + c·∇_S(ψ·x) + (a₀ + a₁ φ·x) ∂_z` with caloric `a₀, b` and
/// `a₁ = (−t)^{(n−1)/(2(n−2))} â₁`, `c = (−t)^{−(n−3)/(2(n−2))} ĉ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOneField {
    pub n: usize,
    pub axial: TrigHeat,
    pub tilt: TrigHeat,
    pub phi: Vec<f64>,
    pub rotation: TrigHeat,
    pub generator: DMatrix<f64>,
    pub gradient: TrigHeat,
    pub psi: Vec<f64>,
}

impl LevelOneField {
    /// Random coefficients and directions; the axial mean is kept away from
    /// zero so `|V|` stays smooth.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n < 4 {
            return Err(LabError::Dimension { got: n, need: ">= 4" });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut axial = TrigHeat::random(&mut rng, 2);
        axial.constant = 3.0 + rng.gen_range(0.0..1.0);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let generator = (&a - a.transpose()) * 0.5;
        let unit = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let phi = unit(&mut rng);
        let psi = unit(&mut rng);
        Ok(Self {
            n,
            axial,
            tilt: TrigHeat::random(&mut rng, 2),
            phi,
            rotation: TrigHeat::random(&mut rng, 2),
            generator,
            gradient: TrigHeat::random(&mut rng, 2),
            psi,
        })
    }

    /// `∂_z^order` of `[a₀, a₁, b, c]` at `(z, t)`.
    fn coefficients(&self, z: f64, t: f64, order: u32) -> [f64; 4] {
        let p = (-t).powf(growing_exponent(self.n));
        let q = (-t).powf(growing_norm_exponent(self.n));
        [
            self.axial.dz(z, t, order),
            p * self.tilt.dz(z, t, order),
            self.rotation.dz(z, t, order),
            q * self.gradient.dz(z, t, order),
        ]
    }

    /// Time derivative of `[a₀, a₁, b, c]`.
    fn coefficient_rates(&self, z: f64, t: f64) -> [f64; 4] {
        let (pe, qe) = (growing_exponent(self.n), growing_norm_exponent(self.n));
        let p = (-t).powf(pe);
        let q = (-t).powf(qe);
        [
            self.axial.dz(z, t, 2),
            p * (self.tilt.dz(z, t, 2) - pe * self.tilt.eval(z, t) / (-t)),
            self.rotation.dz(z, t, 2),
            q * (self.gradient.dz(z, t, 2) - qe * self.gradient.eval(z, t) / (-t)),
        ]
    }

    fn assemble(&self, x: &[f64], c: [f64; 4]) -> DVector<f64> {
        let n = self.n;
        let mx = &self.generator * DVector::from_column_slice(&x[..n]);
        let px: f64 = self.psi.iter().zip(x).map(|(a, b)| a * b).sum();
        let fx: f64 = self.phi.iter().zip(x).map(|(a, b)| a * b).sum();
        let mut v = DVector::zeros(n + 1);
        for i in 0..n {
            v[i] = c[2] * mx[i] + c[3] * (self.psi[i] - px * x[i]);
        }
        v[n] = c[0] + c[1] * fx;
        v
    }

    /// `V` at the sphere point `x` of slice `z`.
    pub fn value(&self, x: &[f64], z: f64, t: f64) -> DVector<f64> {
        self.assemble(x, self.coefficients(z, t, 0))
    }

    /// `∂_t V` at `(x, z, t)`.
    pub fn rate(&self, x: &[f64], z: f64, t: f64) -> DVector<f64> {
        self.assemble(x, self.coefficient_rates(z, t))
    }

    /// `|V|_{ḡ(t)}`
    pub fn norm(&self, x: &[f64], z: f64, t: f64) -> Result<f64> {
        let r2 = radius_sq(self.n, t)?;
        let v = self.value(x, z, t);
        let s: f64 = v.iter().take(self.n).map(|a| a * a).sum();
        Ok((r2 * s + v[self.n] * v[self.n]).sqrt())
    }

    /// Polynomial field agreeing with `V(t)` to second order in `z` at `z0`.
    pub fn taylor(&self, z0: f64, t: f64) -> Result<VectorField> {
        let n = self.n;
        let d = n + 1;
        let [c0, c1, c2] = [0, 1, 2].map(|o| self.coefficients(z0, t, o));
        let dz = &Poly::var(d, n) - &Poly::constant(d, z0);
        let dz2 = &dz * &dz;
        let coef: Vec<Poly> = (0..4)
            .map(|k| &(&Poly::constant(d, c0[k]) + &dz.scale(c1[k])) + &dz2.scale(0.5 * c2[k]))
            .collect();
        let x = |i: usize| Poly::var(d, i);
        let px = first_harmonic(&self.psi, d);
        let fx = first_harmonic(&self.phi, d);
        let mut comps = Vec::with_capacity(d);
        for i in 0..n {
            let mx = (0..n).fold(Poly::zero(d), |a, j| &a + &x(j).scale(self.generator[(i, j)]));
            let grad = &Poly::constant(d, self.psi[i]) - &(&x(i) * &px);
            comps.push(&(&coef[2] * &mx) + &(&coef[3] * &grad));
        }
        comps.push(&coef[0] + &(&coef[1] * &fx));
        VectorField::new(Space::cylinder(n), comps)
    }

    /// `L_V ḡ(t)`, exact on the slice `z`.
    pub fn lie_derivative(&self, z: f64, t: f64) -> Result<TensorField> {
        let g = TensorField::round(Space::cylinder(self.n), radius_sq(self.n, t)?.sqrt());
        lie_derivative_metric(&self.taylor(z, t)?, &g)
    }

    /// Largest entry of `∂_t V − (ΔV + Ric V)` at the given sphere points of slice `z`.
    pub fn heat_defect(&self, points: &[Vec<f64>], z: f64, t: f64) -> Result<f64> {
        let op = vector_heat_operator(&self.taylor(z, t)?, t)?;
        Ok(points
            .iter()
            .map(|x| (op.eval(&with_axis(x, z)) - self.rate(x, z, t)).amax())
            .fold(0.0, f64::max))
    }

    /// `∂_t|V| − Δ_{ḡ}|V|` at `(x, z, t)` by fourth-order differences of
    /// step `h`; the sphere Laplacian uses the degree-zero extension off the sphere.
    pub fn subsolution_defect(&self, x: &[f64], z: f64, t: f64, h: f64) -> Result<f64> {
        let n = self.n;
        if t + 2.0 * h >= 0.0 {
            return Err(LabError::NonNegativeTime { t: t + 2.0 * h });
        }
        let f = |y: &[f64], zz: f64, tt: f64| -> Result<f64> {
            let r = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            let u: Vec<f64> = y.iter().map(|a| a / r).collect();
            self.norm(&u, zz, tt)
        };
        let f0 = f(x, z, t)?;
        let d1 = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            Ok((g(-2.0 * h)? - 8.0 * g(-h)? + 8.0 * g(h)? - g(2.0 * h)?) / (12.0 * h))
        };
        let d2 = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            Ok((-g(-2.0 * h)? + 16.0 * g(-h)? - 30.0 * f0 + 16.0 * g(h)? - g(2.0 * h)?) / (12.0 * h * h))
        };
        let ft = d1(&|s| f(x, z, t + s))?;
        let fzz = d2(&|s| f(x, z + s, t))?;
        let mut lap_s = 0.0;
        for i in 0..n {
            lap_s += d2(&|s| {
                let mut y = x.to_vec();
                y[i] += s;
                f(&y, z, t)
            })?;
        }
        Ok(ft - (lap_s / radius_sq(n, t)? + fzz))
    }
}

// ---------------------------------------------------------------------------
// Asymptotic profile

/// Angular factor attached to a mode trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angular {
    /// level-0 `ω` or `β`, part of the profile
    Mean,
    /// `x_i` coefficient of `ω`, fitted into `ψ`
    FirstHarmonic(usize),
    /// any other eigen-piece, with the `g_S`-sup of its angular factor
    Other { sup: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub angular: Angular,
    pub coeff: ModeCoefficient,
}

/// Rows and columns entering the least-squares fit of `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiFit {
    /// the output window itself
    Window,
    /// the final quarter of the time range, `|z| ≤ z_max`
    FinalQuarter,
}

/// Output window `{|z| ≤ z_max, t_min ≤ t ≤ t_end}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileWindow {
    pub z_max: f64,
    pub t_min: f64,
    pub psi_fit: PsiFit,
}

impl Default for ProfileWindow {
    fn default() -> Self {
        Self {
            z_max: 1.0,
            t_min: -1.0,
            psi_fit: PsiFit::Window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    #[serde(rename = "L")]
    pub l: f64,
    /// `ω̄` and `β̄` at `z = 0` on the final row
    pub omega_bar: f64,
    pub beta_bar: f64,
    pub psi: Vec<f64>,
    /// sup over the window of the triangle bound for `|h − profile|_{ḡ(t)}`
    pub residual: f64,
    pub early_norm: f64,
    pub late_norm: f64,
}

fn angular_sup(a: &Angular) -> f64 {
    match a {
        Angular::Other { sup } => *sup,
        _ => 1.0,
    }
}

/// Triangle bounds for `sup |h|_{ḡ(t)}` over `t ≤ −L/4` and over all rows.
pub fn hypothesis_norms(l: f64, trajs: &[ModeTrajectory]) -> Result<(f64, f64)> {
    let first = trajs.first().ok_or_else(|| LabError::Invalid("no trajectories".into()))?;
    let (nz, ts) = (first.coeff.z.len(), &first.coeff.t);
    let (mut early, mut late) = (0.0f64, 0.0f64);
    for (j, t) in ts.iter().enumerate() {
        let mut b = vec![0.0; nz];
        for tr in trajs {
            let w = tr.coeff.mode.weight(*t)? * angular_sup(&tr.angular);
            for (bi, v) in b.iter_mut().zip(&tr.coeff.values[j]) {
                *bi += w * v.abs();
            }
        }
        let m = b.into_iter().fold(0.0, f64::max);
        late = late.max(m);
        if *t <= -0.25 * l {
            early = early.max(m);
        }
    }
    Ok((early, late))
}

fn nearest(v: &[f64], x: f64) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap())
        .unwrap()
        .0
}

/// Extracts `ω̄`, `β̄` and `ψ` from mode trajectories on
/// `{|z| ≤ L/2, −L/2 ≤ t ≤ t_end}` and bounds what is left over the window.
pub fn asymptotic_profile(n: usize, l: f64, trajs: &[ModeTrajectory], window: ProfileWindow) -> Result<ProfileFit> {
    let first = trajs.first().ok_or_else(|| LabError::Invalid("no trajectories".into()))?;
    let (zs, ts) = (&first.coeff.z, &first.coeff.t);
    for tr in trajs {
        let s = tr.coeff.mode;
        if s.n != n || tr.coeff.z != *zs || tr.coeff.t != *ts {
            return Err(LabError::Invalid("trajectories must share n and the (z, t) grid".into()));
        }
        let ok = match tr.angular {
            Angular::Mean => s.eigenvalue == 0.0 && matches!(s.kind, ModeKind::Omega | ModeKind::Beta),
            Angular::FirstHarmonic(i) => {
                i < n && s.kind == ModeKind::Omega && s.eigenvalue == harmonic_eigenvalue(n, 1)
            }
            Angular::Other { sup } => sup >= 0.0,
        };
        if !ok {
            return Err(LabError::Invalid(format!("angular tag {:?} does not fit {:?}", tr.angular, s)));
        }
    }
    let t_end = *ts.last().unwrap();
    let z_lo = zs[0];
    if z_lo > -window.z_max || *zs.last().unwrap() < window.z_max {
        return Err(LabError::Window {
            needed: window.z_max,
            have: -z_lo,
        });
    }
    if ts[0] > window.t_min || t_end < window.t_min {
        return Err(LabError::Window {
            needed: -window.t_min,
            have: -ts[0],
        });
    }

    let (early_norm, late_norm) = hypothesis_norms(l, trajs)?;
    if early_norm > 1.0 + 1e-12 {
        return Err(LabError::Hypothesis(format!("|h| = {early_norm:.3e} > 1 before t = -L/4")));
    }
    if late_norm > l.powi(10) {
        return Err(LabError::Hypothesis(format!("|h| = {late_norm:.3e} exceeds L^10")));
    }

    let inside: Vec<usize> = (0..zs.len()).filter(|&i| zs[i].abs() <= window.z_max + 1e-12).collect();
    let lam = growing_exponent(n);
    let fit_from = match window.psi_fit {
        PsiFit::Window => window.t_min,
        PsiFit::FinalQuarter => t_end - 0.25 * (t_end - ts[0]),
    };
    let mut psi = vec![0.0; n];
    for tr in trajs {
        if let Angular::FirstHarmonic(k) = tr.angular {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, t) in ts.iter().enumerate().filter(|(_, t)| **t >= fit_from - 1e-12) {
                let w = (-t).powf(lam);
                for &i in &inside {
                    num += tr.coeff.values[j][i] * w;
                    den += w * w;
                }
            }
            psi[k] += num / den;
        }
    }

    let mut residual = 0.0f64;
    for (j, t) in ts.iter().enumerate().filter(|(_, t)| **t >= window.t_min - 1e-12) {
        for &i in &inside {
            let mut r = 0.0;
            for tr in trajs {
                let c = tr.coeff.values[j][i];
                let w = tr.coeff.mode.weight(*t)?;
                r += match tr.angular {
                    Angular::Mean => 0.0,
                    Angular::FirstHarmonic(k) => w * (c - psi[k] * (-t).powf(lam)).abs(),
                    Angular::Other { sup } => w * sup * c.abs(),
                };
            }
            residual = residual.max(r);
        }
    }

    let (j_last, i0) = (ts.len() - 1, nearest(zs, 0.0));
    let mean_of = |kind: ModeKind| {
        trajs
            .iter()
            .filter(|tr| tr.angular == Angular::Mean && tr.coeff.mode.kind == kind)
            .map(|tr| tr.coeff.values[j_last][i0])
            .sum::<f64>()
    };
    Ok(ProfileFit {
        l,
        omega_bar: mean_of(ModeKind::Omega),
        beta_bar: mean_of(ModeKind::Beta),
        psi,
        residual,
        early_norm,
        late_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub dz: f64,
    pub dt_out: f64,
    /// cosine terms in each random initial profile
    pub waves: usize,
    /// base wavenumber in the parabolic variable `z/√(L/2)`
    pub wavenumber: f64,
    pub window: ProfileWindow,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            dz: 0.25,
            dt_out: 0.125,
            waves: 3,
            wavenumber: 0.5,
            window: ProfileWindow::default(),
        }
    }
}

/// Modes used by the random-data experiment with their angular tags.
pub fn experiment_catalog(n: usize) -> Result<Vec<(ModeSpec, Angular)>> {
    let m = n as f64;
    let other = Angular::Other { sup: 1.0 };
    let mut out = vec![
        (ModeSpec::harmonic(n, ModeKind::Omega, 0)?, Angular::Mean),
        (ModeSpec::harmonic(n, ModeKind::Beta, 0)?, Angular::Mean),
    ];
    for i in 0..n {
        out.push((ModeSpec::harmonic(n, ModeKind::Omega, 1)?, Angular::FirstHarmonic(i)));
    }
    for mu in [1.0, 2.0, m - 1.0] {
        out.push((ModeSpec::new(n, ModeKind::Sigma, mu)?, other));
    }
    for nu in [2.0 * (m - 2.0), 2.0 * m] {
        out.push((ModeSpec::new(n, ModeKind::Chi, nu)?, other));
    }
    out.push((ModeSpec::harmonic(n, ModeKind::Omega, 2)?, other));
    out.push((ModeSpec::harmonic(n, ModeKind::Beta, 1)?, other));
    out.push((ModeSpec::harmonic(n, ModeKind::Beta, 2)?, other));
    Ok(out)
}

/// Seeded random admissible data: each mode starts at `t = −L/2` with an equal
/// share of the `ḡ`-norm budget and keeps its caloric boundary values fixed;
/// the whole set is then scaled so that `sup |h| = 1` on `t ≤ −L/4`.
/// The random profiles are functions of the parabolic variable `z/√(L/2)`,
/// so the same seed gives self-similar data at every `L`.
pub fn random_trajectories(n: usize, l: f64, seed: u64, opts: &ExperimentOptions) -> Result<Vec<ModeTrajectory>> {
    let catalog = experiment_catalog(n)?;
    let half = 0.5 * l;
    let t0 = -half;
    let t1 = reference_time(n);
    if !(t0 < t1) {
        return Err(LabError::Window { needed: -t1, have: half });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Vec<[f64; 2]>> = catalog
        .iter()
        .map(|_| {
            (0..opts.waves)
                .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)])
                .collect()
        })
        .collect();
    let share = 1.0 / catalog.len() as f64;
    let nz = (l / opts.dz).round().max(2.0) as usize;
    let nt = ((t1 - t0) / opts.dt_out).round().max(1.0) as usize;
    let grid = HeatGrid::new(nz, t0, t1, nt);
    catalog
        .par_iter()
        .zip(&profiles)
        .map(|((mode, angular), prof)| {
            let norm: f64 = prof.iter().map(|p| p[0].abs()).sum::<f64>().max(1e-300);
            let sup = match angular {
                Angular::Other { sup } => *sup,
                _ => 1.0,
            };
            let amp = share / (mode.weight(t0)? * sup * norm);
            let shape = |z: f64| {
                prof.iter()
                    .enumerate()
                    .map(|(m, p)| p[0] * ((m + 1) as f64 * opts.wavenumber * z / half.sqrt() + p[1]).cos())
                    .sum::<f64>()
                    * amp
            };
            let e = mode.exponent();
            let (cl, cr) = (shape(-half), shape(half));
            let left = |t: f64| cl * (t / t0).powf(e);
            let right = |t: f64| cr * (t / t0).powf(e);
            let data = ModeData {
                l: half,
                initial: &shape,
                left: &left,
                right: &right,
            };
            Ok(ModeTrajectory {
                angular: *angular,
                coeff: mode_evolve(*mode, &data, grid)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|mut trajs| {
            // linear problem: rescale so the early bound is exactly 1
            let (early, _) = hypothesis_norms(l, &trajs)?;
            for tr in &mut trajs {
                for v in tr.coeff.values.iter_mut().flatten() {
                    *v /= early;
                }
            }
            Ok(trajs)
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileExperiment {
    pub n: usize,
    pub seed: u64,
    pub fits: Vec<ProfileFit>,
    /// least-squares slope of `log residual` against `log L`
    pub slope: f64,
    /// `−1/(2(n−2))`
    pub predicted_slope: f64,
}

pub fn profile_experiment(n: usize, ls: &[f64], seed: u64, opts: &ExperimentOptions) -> Result<ProfileExperiment> {
    if ls.len() < 2 {
        return Err(LabError::Invalid("need at least two values of L".into()));
    }
    let fits = ls
        .iter()
        .map(|&l| asymptotic_profile(n, l, &random_trajectories(n, l, seed, opts)?, opts.window))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.l.ln(), f.residual.ln())).collect();
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(ProfileExperiment {
        n,
        seed,
        fits,
        slope: sxy / sxx,
        predicted_slope: -1.0 / (2.0 * (n as f64 - 2.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::sample_sphere;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit(n: usize, i: usize) -> Vec<f64> {
        (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    fn cylinder_metric(n: usize, t: f64) -> TensorField {
        TensorField::round(Space::cylinder(n), radius_sq(n, t).unwrap().sqrt())
    }

    #[test]
    fn background_metric_is_pure_trace_and_axial() {
        let (n, t) = (4, -0.7);
        let d = decompose(&cylinder_metric(n, t), &[0.0, 1.5]).unwrap();
        for s in &d.slices {
            assert_relative_eq!(s.omega_bar(), -2.0 * (n as f64 - 2.0) * t, epsilon = 1e-12);
            assert_relative_eq!(s.beta_bar(), 1.0, epsilon = 1e-12);
            assert!(s.chi_norm() < 1e-12);
            assert!(s.sigma.families.iter().flatten().all(|c| c.abs() < 1e-12));
            assert!(s.unresolved() < 1e-12);
        }
    }

    #[test]
    fn first_harmonic_trace_has_psi_direction() {
        let n = 5;
        let x1 = Poly::var(n + 1, 0);
        let h = TensorField::round(Space::cylinder(n), 1.0).mul_poly(&x1);
        let d = decompose(&h, &[0.0]).unwrap();
        let s = &d.slices[0];
        assert_relative_eq!(s.psi()[0], 1.0, epsilon = 1e-12);
        assert!(s.psi()[1..].iter().all(|c| c.abs() < 1e-12));
        assert!(s.omega.levels[0][0].abs() < 1e-12 && s.omega.levels[2].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn killing_cross_term_is_pure_sigma() {
        let n = 4;
        let theta = VectorField::rotation(Space::cylinder(n), &elementary_rotation(n, 1, 3));
        let mut h = TensorField::zero(Space::cylinder(n));
        for i in 0..n {
            h.comps[i][n] = theta.comps[i].clone();
            h.comps[n][i] = theta.comps[i].clone();
        }
        let s = decompose(&h, &[0.3]).unwrap().slices.remove(0);
        // oracle: least squares of σ(x) against all family fields at sample points
        let fields: Vec<VectorField> = OneFormFamily::ALL.iter().flat_map(|f| f.fields(n).unwrap()).collect();
        let pts = sample_sphere(n, 60, 9);
        let rows = pts.len() * n;
        let a = DMatrix::from_fn(rows, fields.len(), |r, k| fields[k].comps[r % n].eval(&pts[r / n]));
        let b = DVector::from_fn(rows, |r, _| theta.comps[r % n].eval(&with_axis(&pts[r / n], 0.3)));
        let coef = a.svd(true, true).solve(&b, 1e-12).unwrap();
        let ours: Vec<f64> = s.sigma.families.iter().flatten().cloned().collect();
        for (x, y) in ours.iter().zip(coef.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        let k = rotation_pairs(n).iter().position(|p| *p == (1, 3)).unwrap();
        assert_relative_eq!(s.sigma.families[1][k], 1.0, epsilon = 1e-12);
        assert!(s.omega_poly.max_abs_coeff() < 1e-14 && s.beta_poly.is_zero() && s.chi_norm() < 1e-12);
    }

    fn random_tensor(n: usize, seed: u64) -> TensorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = n + 1;
        let mut h = TensorField::zero(Space::cylinder(n));
        let rand_poly = |rng: &mut ChaCha8Rng| {
            let mut p = Poly::constant(d, rng.gen_range(-1.0..1.0));
            for i in 0..d {
                p = &p + &Poly::var(d, i).scale(rng.gen_range(-1.0..1.0));
                for j in i..d {
                    p = &p + &(&Poly::var(d, i) * &Poly::var(d, j)).scale(rng.gen_range(-1.0..1.0));
                }
            }
            p
        };
        for i in 0..d {
            for j in i..d {
                let p = rand_poly(&mut rng);
                h.comps[i][j] = p.clone();
                h.comps[j][i] = p;
            }
        }
        h
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn reassembly_round_trip(seed in 0u64..1000, n in 4usize..6) {
            let h = random_tensor(n, seed);
            let d = decompose(&h, &[-0.8, 0.0, 1.1]).unwrap();
            let pts = sample_sphere(n, 25, seed);
            prop_assert!(d.reassembly_defect(&h, &pts).unwrap() < 1e-10);
        }

        #[test]
        fn evolution_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let mode = ModeSpec::new(4, ModeKind::Sigma, 2.0).unwrap();
            let f = |z: f64| (0.3 * z).cos();
            let g = |z: f64| 1.0 + 0.1 * z;
            let fb = |t: f64| f(5.0) * (1.0 - t);
            let gl = |_: f64| g(-5.0);
            let gr = |_: f64| g(5.0);
            let grid = HeatGrid::new(50, -3.0, -0.5, 5);
            let run = |init: &dyn Fn(f64) -> f64, l: &dyn Fn(f64) -> f64, r: &dyn Fn(f64) -> f64| {
                mode_evolve(mode, &ModeData { l: 5.0, initial: init, left: l, right: r }, grid).unwrap()
            };
            let u = run(&f, &fb, &fb);
            let v = run(&g, &gl, &gr);
            let w = run(&|z| a * f(z) + b * g(z), &|t| a * fb(t) + b * gl(t), &|t| a * fb(t) + b * gr(t));
            for j in 0..w.t.len() {
                for i in 0..w.z.len() {
                    prop_assert!((w.values[j][i] - a * u.values[j][i] - b * v.values[j][i]).abs() < 1e-12);
                }
            }
        }
    }

    fn manufactured_errors(mode: ModeSpec) -> Vec<f64> {
        let e = mode.exponent();
        let exact = move |z: f64, t: f64| (-t).powf(e) * (-t).exp() * z.cos();
        let (t0, t1) = (-2.0, -0.5);
        [20, 40, 80]
            .iter()
            .map(|&nz| {
                let init = |z: f64| exact(z, t0);
                let left = |t: f64| exact(-3.0, t);
                let right = |t: f64| exact(3.0, t);
                let data = ModeData { l: 3.0, initial: &init, left: &left, right: &right };
                let m = mode_evolve(mode, &data, HeatGrid::new(nz, t0, t1, 10)).unwrap();
                let mut err = 0.0f64;
                for (j, t) in m.t.iter().enumerate() {
                    for (i, z) in m.z.iter().enumerate() {
                        err = err.max((m.values[j][i] - exact(*z, *t)).abs());
                    }
                }
                err
            })
            .collect()
    }

    #[test]
    fn manufactured_modes_converge_at_second_order() {
        let n = 4;
        for mode in [
            ModeSpec::new(n, ModeKind::Chi, 4.0).unwrap(),
            ModeSpec::new(n, ModeKind::Sigma, 1.0).unwrap(),
            ModeSpec::harmonic(n, ModeKind::Omega, 1).unwrap(),
            ModeSpec::harmonic(n, ModeKind::Beta, 2).unwrap(),
        ] {
            let e = manufactured_errors(mode);
            for w in e.windows(2) {
                assert!((w[0] / w[1] - 4.0).abs() < 0.3, "{mode:?}: {e:?}");
            }
        }
    }

    #[test]
    fn mean_mode_is_a_heat_solution() {
        // with exponent zero the manufactured solution is e^{-t} cos z
        let mode = ModeSpec::harmonic(5, ModeKind::Omega, 0).unwrap();
        assert_eq!(mode.exponent(), 0.0);
        let e = manufactured_errors(mode);
        assert!((e[1] / e[2] - 4.0).abs() < 0.3, "{e:?}");
    }

    #[test]
    fn constant_first_harmonic_data_grow() {
        let n = 4;
        let mode = ModeSpec::harmonic(n, ModeKind::Omega, 1).unwrap();
        let q = 0.7;
        let exact = move |t: f64| q * (-t).powf(growing_exponent(n));
        let (t0, t1) = (-4.0, reference_time(n));
        let init = |_: f64| exact(t0);
        let side = |t: f64| exact(t);
        let m = mode_evolve(mode, &ModeData { l: 2.0, initial: &init, left: &side, right: &side }, HeatGrid::new(40, t0, t1, 8)).unwrap();
        for (row, t) in m.values.iter().zip(&m.t) {
            assert!(row.iter().all(|v| (v - exact(*t)).abs() < 1e-12));
        }
    }

    #[test]
    fn substitution_and_direct_schemes_agree_on_refinement() {
        let mode = ModeSpec::new(4, ModeKind::Chi, 8.0).unwrap();
        let init = |z: f64| 1.0 + 0.5 * (0.8 * z).sin();
        let left = |t: f64| init(-4.0) * (t / -3.0).powi(2);
        let right = |t: f64| init(4.0) * (t / -3.0).powi(2);
        let data = ModeData { l: 4.0, initial: &init, left: &left, right: &right };
        let gap = |nz: usize| {
            let g = HeatGrid::new(nz, -3.0, -0.5, 5);
            let a = mode_evolve(mode, &data, g).unwrap();
            let b = mode_evolve_direct(mode, &data, g).unwrap();
            a.last().iter().zip(b.last()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(20), gap(40));
        assert!(g2 < g1 / 3.0, "{g1} {g2}");
        assert!(g2 < 1e-3);
    }

    #[test]
    fn larger_chi_eigenvalues_decay_faster() {
        let n = 5;
        let l = 24.0;
        let one = |_: f64| 1.0;
        let zero = |_: f64| 0.0;
        let t0 = -l / 4.0;
        let grid = HeatGrid::new(96, t0, reference_time(n), 40);
        let mut last = f64::INFINITY;
        for nu in [2.0, 6.0, 10.0, 20.0, 40.0] {
            let mode = ModeSpec::new(n, ModeKind::Chi, nu).unwrap();
            let w0 = mode.weight(t0).unwrap();
            let init = |_z: f64| one(0.0) / w0;
            let m = mode_evolve(mode, &ModeData { l: l / 2.0, initial: &init, left: &zero, right: &zero }, grid).unwrap();
            let fin = m.weighted_sup(m.t.len() - 1).unwrap();
            assert!(fin <= last, "nu = {nu}");
            last = fin;
        }
    }

    #[test]
    fn nonnegative_times_and_bad_spectra_are_rejected() {
        let mode = ModeSpec::new(4, ModeKind::Beta, 0.0).unwrap();
        let f = |_: f64| 0.0;
        let data = ModeData { l: 1.0, initial: &f, left: &f, right: &f };
        assert!(matches!(mode_evolve(mode, &data, HeatGrid::new(10, -1.0, 0.0, 2)), Err(LabError::NonNegativeTime { .. })));
        assert!(ModeSpec::new(4, ModeKind::Sigma, 0.5).is_err());
        assert!(ModeSpec::new(4, ModeKind::Omega, 1.0).is_err());
        assert!(ModeSpec::new(3, ModeKind::Chi, 4.0).is_err());
        assert!(decompose(&TensorField::round(Space::sphere(4), 1.0), &[0.0]).is_err());
    }

    #[test]
    fn exponent_bounds() {
        for n in 4..9 {
            let m = n as f64;
            let chi = ModeSpec::new(n, ModeKind::Chi, 2.0).unwrap();
            assert_relative_eq!(chi.shifted(), 2.0 / (m - 2.0), epsilon = 1e-15);
            let sig = ModeSpec::new(n, ModeKind::Sigma, 1.0).unwrap();
            assert_relative_eq!(sig.shifted(), 1.0 / (2.0 * (m - 2.0)), epsilon = 1e-15);
            let om = ModeSpec::harmonic(n, ModeKind::Omega, 1).unwrap();
            assert_relative_eq!(om.shifted(), growing_exponent(n), epsilon = 1e-15);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        for n in 4..7 {
            let m = n as f64;
            let pts = {
                let mut p = sample_sphere(n, 100, 2);
                p.push(unit(n, 0));
                p
            };
            let norm_of = |h: &TensorField, t: f64| {
                let d = decompose(h, &[0.0]).unwrap();
                let w = weighted_norm(&d.slices[0], n, t, &pts).unwrap();
                assert!(w.comparable);
                let direct = pts.iter().map(|x| metric_norm(h, 0.0, t, x).unwrap()).fold(0.0, f64::max);
                assert_relative_eq!(w.metric, direct, max_relative = 1e-12);
                w.metric
            };
            for t in [-0.3, -2.0, -11.0] {
                let h = NeutralSolution::Omega(-t).tensor(n, t).unwrap();
                assert_relative_eq!(norm_of(&h, t), (m - 1.0).sqrt() / (2.0 * (m - 2.0)), epsilon = 1e-12);
                let b = NeutralSolution::Beta(-1.7).tensor(n, t).unwrap();
                assert_relative_eq!(norm_of(&b, t), 1.7, epsilon = 1e-12);
            }
            let g = |t: f64| norm_of(&NeutralSolution::Growing(unit(n, 0)).tensor(n, t).unwrap(), t);
            let slope = (g(-8.0) / g(-0.5)).ln() / 16f64.ln();
            assert!((slope - growing_norm_exponent(n)).abs() < 1e-6);
        }
    }

    #[test]
    fn neutral_solutions_satisfy_the_mode_system() {
        for n in [4, 5] {
            let psi: Vec<f64> = (0..n).map(|i| 0.2 + 0.1 * i as f64).collect();
            for sol in [NeutralSolution::Omega(1.3), NeutralSolution::Beta(-0.7), NeutralSolution::Growing(psi)] {
                let s = sol.clone();
                let r = mode_system_residual(n, &move |_, t| s.tensor(n, t), 0.4, -0.9, 1e-3).unwrap();
                assert!(r.max() <= 1e-10, "{sol:?}: {r:?}");
            }
        }
    }

    #[test]
    fn conformal_killing_removal_identities() {
        let n = 4;
        let pts = sample_sphere(n, 1000, 5);
        let ck = conformal_killing_removal(n, &unit(n, 0), reference_time(n)).unwrap();
        assert!(ck.lie_residual(&pts).unwrap() <= 1e-12);
        let ck = conformal_killing_removal(n, &[0.3, -0.2, 0.5, 0.1], -1.0).unwrap();
        assert_relative_eq!(ck.bochner_eigenvalue, 0.25, epsilon = 1e-15);
        assert!(ck.bochner_residual(&pts).unwrap() <= 1e-12);
        assert!(ck.lie_residual(&pts).unwrap() <= 1e-12);
        let zero = conformal_killing_removal(n, &[0.0; 4], -1.0).unwrap();
        assert!(zero.xi.max_abs_coeff() == 0.0 && zero.k.comps.iter().flatten().all(|p| p.is_zero()));
    }

    /// `Σ_e d²/ds² R_{−s} V(γ_e(s))` at `s = 0` along great circles, i.e. the
    /// rough Laplacian by parallel transport.
    fn transported_laplacian(v: &dyn Fn(&[f64]) -> DVector<f64>, p: &[f64], h: f64) -> DVector<f64> {
        let n = p.len();
        let pv = DVector::from_column_slice(p);
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for k in 0..n {
            let mut e = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
            e -= &pv * pv.dot(&e);
            for b in &basis {
                e -= b * b.dot(&e);
            }
            if e.norm() > 1e-6 {
                basis.push(e.normalize());
            }
        }
        let mut out = DVector::zeros(n);
        for e in &basis {
            let pull = |s: f64| {
                let x = &pv * s.cos() + e * s.sin();
                let w = v(x.as_slice());
                let (a, b) = (w.dot(&pv), w.dot(e));
                let perp = &w - &pv * a - e * b;
                perp + &pv * (a * s.cos() + b * s.sin()) + e * (-a * s.sin() + b * s.cos())
            };
            out += (pull(-2.0 * h) * -1.0 + pull(-h) * 16.0 - pull(0.0) * 30.0 + pull(h) * 16.0 - pull(2.0 * h))
                / (12.0 * h * h);
        }
        out
    }

    #[test]
    fn vector_heat_operator_kernel_and_eigenvalues() {
        let n = 5;
        let t = -0.6;
        let r2 = radius_sq(n, t).unwrap();
        let pts = sample_sphere(n, 30, 4);
        let axial = vector_heat_operator(&VectorField::axial(n), t).unwrap();
        assert!(axial.max_abs_coeff() < 1e-15);

        let mut gx = gradient_field(&harmonic_basis(n, 1).unwrap()[0]);
        gx.space = Space::cylinder(n);
        gx.comps = gx.comps.iter().map(|p| p.extend_vars(1)).collect();
        gx.comps.push(Poly::zero(n + 1));
        let out = vector_heat_operator(&gx, t).unwrap();
        let ev = (n as f64 - 3.0) / r2;
        for x in &pts {
            let xz = with_axis(x, 0.2);
            assert!((out.eval(&xz) - gx.eval(&xz) * ev).amax() < 1e-13);
        }

        let m = elementary_rotation(n, 0, 2) * 0.8 + elementary_rotation(n, 1, 4) * 0.3;
        let kill = VectorField::rotation(Space::cylinder(n), &m);
        let op = vector_heat_operator(&kill, t).unwrap();
        let sphere_kill = VectorField::rotation(Space::sphere(n), &m);
        for x in &pts {
            let fd = transported_laplacian(&|y| sphere_kill.eval(y), x, 1e-3);
            let oracle = (fd + sphere_kill.eval(x) * (n as f64 - 2.0)) / r2;
            let ours = op.eval(&with_axis(x, 0.0));
            assert!((ours.rows(0, n) - oracle).amax() < 1e-8);
        }
        let sphere_grad = gradient_field(&harmonic_basis(n, 2).unwrap()[3]);
        let rl = rough_laplacian(&sphere_grad).unwrap();
        for x in &pts {
            let fd = transported_laplacian(&|y| sphere_grad.eval(y), x, 1e-3);
            assert!((rl.eval(x) - fd).amax() < 1e-8);
        }
    }

    #[test]
    fn lie_derivative_of_heat_flow_field_solves_the_mode_system() {
        for n in [4, 5] {
            let f = LevelOneField::random(n, 11).unwrap();
            let pts = sample_sphere(n, 12, 1);
            for (z, t) in [(0.0, -1.0), (0.9, -0.4), (-1.7, -2.5)] {
                assert!(f.heat_defect(&pts, z, t).unwrap() < 1e-12);
                let r = mode_system_residual(n, &|zz, tt| f.lie_derivative(zz, tt), z, t, 1e-3).unwrap();
                assert!(r.max() <= 1e-6, "{r:?}");
                for x in &pts {
                    assert!(f.subsolution_defect(x, z, t, 1e-3).unwrap() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn exact_profile_has_no_residual() {
        let n = 4;
        let l = 20.0;
        let (t0, t1) = (-l / 2.0, reference_time(n));
        let grid = HeatGrid::new(80, t0, t1, 39);
        let zero = |_: f64| 0.0;
        let cst = |c: f64| move |_: f64| c;
        let mut trajs = Vec::new();
        let (wbar, bbar) = (cst(0.02), cst(0.3));
        for (kind, f) in [(ModeKind::Omega, &wbar as &dyn Fn(f64) -> f64), (ModeKind::Beta, &bbar)] {
            let mode = ModeSpec::harmonic(n, kind, 0).unwrap();
            let m = mode_evolve(mode, &ModeData { l: l / 2.0, initial: f, left: f, right: f }, grid).unwrap();
            trajs.push(ModeTrajectory { angular: Angular::Mean, coeff: m });
        }
        let q = [0.01, -0.02, 0.0, 0.015];
        let lam = growing_exponent(n);
        for (i, qi) in q.iter().enumerate() {
            let mode = ModeSpec::harmonic(n, ModeKind::Omega, 1).unwrap();
            let init = move |_: f64| qi * (-t0).powf(lam);
            let side = move |t: f64| qi * (-t).powf(lam);
            let m = mode_evolve(mode, &ModeData { l: l / 2.0, initial: &init, left: &side, right: &side }, grid).unwrap();
            trajs.push(ModeTrajectory { angular: Angular::FirstHarmonic(i), coeff: m });
        }
        let fit = asymptotic_profile(n, l, &trajs, ProfileWindow::default()).unwrap();
        assert!(fit.residual < 1e-12);
        assert_relative_eq!(fit.omega_bar, 0.02, epsilon = 1e-12);
        assert_relative_eq!(fit.beta_bar, 0.3, epsilon = 1e-12);
        for (a, b) in fit.psi.iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }

        // a pure χ mode leaves only itself
        let mode = ModeSpec::new(n, ModeKind::Chi, 4.0).unwrap();
        let w0 = mode.weight(t0).unwrap();
        let init = |z: f64| 0.5 * (0.3 * z).cos() / w0;
        let m = mode_evolve(mode, &ModeData { l: l / 2.0, initial: &init, left: &zero, right: &zero }, grid).unwrap();
        let only = vec![ModeTrajectory { angular: Angular::Other { sup: 1.0 }, coeff: m.clone() }];
        let fit = asymptotic_profile(n, l, &only, ProfileWindow::default()).unwrap();
        assert!(fit.omega_bar == 0.0 && fit.beta_bar == 0.0 && fit.psi.iter().all(|p| *p == 0.0));
        let mut direct = 0.0f64;
        for (j, t) in m.t.iter().enumerate().filter(|(_, t)| **t >= -1.0) {
            for (i, _) in m.z.iter().enumerate().filter(|(_, z)| z.abs() <= 1.0) {
                direct = direct.max(mode.weight(*t).unwrap() * m.values[j][i].abs());
            }
        }
        assert_relative_eq!(fit.residual, direct, max_relative = 1e-14);

        let mut big = only.clone();
        big[0].coeff.values[0].iter_mut().for_each(|v| *v *= 10.0);
        assert!(matches!(asymptotic_profile(n, l, &big, ProfileWindow::default()), Err(LabError::Hypothesis(_))));
    }

    #[test]
    fn random_profile_residual_decays_with_l() {
        let ex = profile_experiment(4, &[20.0, 40.0, 80.0], 3, &ExperimentOptions::default()).unwrap();
        assert!(ex.fits.windows(2).all(|w| w[1].residual < w[0].residual));
        assert!(ex.slope <= ex.predicted_slope + 0.1);
        assert!(ex.fits.iter().all(|f| (f.early_norm - 1.0).abs() < 1e-12));
    }
}

//! Hamilton's CMC foliation of near-cylindrical necks.
//!
//! Metrics have the form `g = G(u, z) dz² + E(u, z) g_S` with `u = x_1` the
//! first sphere coordinate and `E, G` of harmonic level at most one in `u`.
//! Such metrics are invariant under the rotations fixing `e_1`, so every CMC
//! leaf is a vertical graph `z = h(θ)`, `u = cos θ`, expanded as a cosine
//! series in `θ` (equivalently a Chebyshev series in `u`). All geometry then
//! reduces to the orbit space `(θ, z)` with metric `E dθ² + G dz²` and orbit
//! radius `ρ = √E sin θ`.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::gauss_kronrod;
use crate::sphere::{sphere_volume, standard_scale, RotationFamily};

/// Admissibility gate on `ε̂ = ‖g − ḡ‖`.
pub const EPS0: f64 = 0.05;
/// Half-width of the metric's domain in `z`.
pub const DOMAIN: f64 = 10.0;
/// Basepoints must satisfy `|z| ≤ INTERIOR`.
pub const INTERIOR: f64 = 8.0;

/// `a e^{λz} cos(kz + φ)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpWave {
    pub amp: f64,
    pub growth: f64,
    pub freq: f64,
    pub phase: f64,
}

/// A function of `z` as a finite sum of [`ExpWave`]s; closed under products and
/// differentiation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZProfile {
    pub terms: Vec<ExpWave>,
}

impl ZProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::wave(c, 0.0, 0.0)
    }

    /// `a cos(kz + φ)`
    pub fn wave(amp: f64, freq: f64, phase: f64) -> Self {
        Self {
            terms: vec![ExpWave {
                amp,
                growth: 0.0,
                freq,
                phase,
            }],
        }
    }

    /// `a cosh(λz)`
    pub fn cosh(amp: f64, rate: f64) -> Self {
        let half = |growth| ExpWave {
            amp: 0.5 * amp,
            growth,
            freq: 0.0,
            phase: 0.0,
        };
        Self {
            terms: vec![half(rate), half(-rate)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    /// `m`-th derivative at `z`.
    pub fn deriv(&self, z: f64, m: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let modulus = t.growth.hypot(t.freq);
                let arg = t.freq.atan2(t.growth);
                t.amp * modulus.powi(m as i32) * (t.growth * z).exp() * (t.freq * z + t.phase + m as f64 * arg).cos()
            })
            .sum()
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.deriv(z, 0)
    }

    /// Value and first two derivatives.
    fn jet(&self, z: f64) -> [f64; 3] {
        [self.deriv(z, 0), self.deriv(z, 1), self.deriv(z, 2)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| ExpWave { amp: t.amp * s, ..*t }).collect(),
        }
    }

    /// `z ↦ f(a z)`
    pub fn dilate(&self, a: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpWave {
                    growth: t.growth * a,
                    freq: t.freq * a,
                    ..*t
                })
                .collect(),
        }
    }

    /// `z ↦ f(z + c)`
    pub fn shift(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpWave {
                    amp: t.amp * (t.growth * c).exp(),
                    phase: t.phase + t.freq * c,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        Self { terms }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                let growth = a.growth + b.growth;
                let amp = 0.5 * a.amp * b.amp;
                terms.push(ExpWave {
                    amp,
                    growth,
                    freq: a.freq + b.freq,
                    phase: a.phase + b.phase,
                });
                terms.push(ExpWave {
                    amp,
                    growth,
                    freq: a.freq - b.freq,
                    phase: a.phase - b.phase,
                });
            }
        }
        Self { terms }
    }
}

/// `g = (G0 + G1 u) dz² + (E0 + E1 u) g_S` on `S^{n−1} × [−10, 10]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckMetric {
    pub n: usize,
    pub g0: ZProfile,
    pub g1: ZProfile,
    pub e0: ZProfile,
    pub e1: ZProfile,
}

impl NeckMetric {
    /// The unit cylinder `ḡ = dz² + g_S`.
    pub fn cylinder(n: usize) -> Self {
        Self {
            n,
            g0: ZProfile::constant(1.0),
            g1: ZProfile::zero(),
            e0: ZProfile::constant(1.0),
            e1: ZProfile::zero(),
        }
    }

    /// `dz² + φ(z)² g_S`
    pub fn warped(n: usize, phi: &ZProfile) -> Self {
        Self {
            e0: phi.mul(phi),
            ..Self::cylinder(n)
        }
    }

    /// `ḡ + u·a(z) g_S`
    pub fn sphere_bump(n: usize, a: ZProfile) -> Self {
        Self {
            e1: a,
            ..Self::cylinder(n)
        }
    }

    /// The reference perturbation of size `δ` used by the acceptance runs: all
    /// four coefficients move, with `z`-dependence on the unit scale.
    pub fn standard_perturbation(n: usize, delta: f64) -> Self {
        Self {
            n,
            g0: ZProfile::constant(1.0).add(&ZProfile::wave(0.5 * delta, 1.0, 0.3)),
            g1: ZProfile::wave(0.3 * delta, 0.5, 0.0),
            e0: ZProfile::constant(1.0).add(&ZProfile::wave(0.4 * delta, 0.7, 1.1)),
            e1: ZProfile::wave(delta, 1.0, 0.0),
        }
    }

    /// Scales the sphere factor: `E → r² E`.
    pub fn with_radius(&self, r: f64) -> Self {
        Self {
            e0: self.e0.scale(r * r),
            e1: self.e1.scale(r * r),
            ..self.clone()
        }
    }

    /// `max_{l ≤ 10} sup_z |∂^l(G0 − 1)| + |∂^l G1| + √(n−1)(|∂^l(E0 − 1)| + |∂^l E1|)`,
    /// sampled on 801 points of `[−10, 10]`. Equivalent to the `C^10` distance to
    /// `ḡ` since level-one harmonics have bounded covariant derivatives.
    pub fn eps_hat(&self) -> f64 {
        let one = ZProfile::constant(-1.0);
        let (g0, e0) = (self.g0.add(&one), self.e0.add(&one));
        let w = ((self.n - 1) as f64).sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..=800 {
            let z = -DOMAIN + 2.0 * DOMAIN * i as f64 / 800.0;
            for l in 0..=10 {
                let v = g0.deriv(z, l).abs()
                    + self.g1.deriv(z, l).abs()
                    + w * (e0.deriv(z, l).abs() + self.e1.deriv(z, l).abs());
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Smallest of `G0 − |G1|`, `E0 − |E1|` over the sampled domain.
    pub fn definiteness(&self) -> f64 {
        (0..=800)
            .map(|i| {
                let z = -DOMAIN + 2.0 * DOMAIN * i as f64 / 800.0;
                (self.g0.eval(z) - self.g1.eval(z).abs()).min(self.e0.eval(z) - self.e1.eval(z).abs())
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self) -> Result<f64> {
        if self.n < 3 {
            return Err(LabError::Dimension {
                got: self.n,
                need: ">= 3",
            });
        }
        if self.definiteness() <= 0.0 {
            return Err(LabError::Invalid("metric is not positive definite".into()));
        }
        let eps = self.eps_hat();
        if eps > EPS0 {
            return Err(LabError::Inadmissible { eps_hat: eps, gate: EPS0 });
        }
        Ok(eps)
    }

    pub fn hash(&self) -> String {
        let mut h = DefaultHasher::new();
        serde_json::to_string(self).unwrap_or_default().hash(&mut h);
        format!("{:016x}", h.finish())
    }

    /// `(E, G)` at a point.
    pub fn coefficients(&self, u: f64, z: f64) -> (f64, f64) {
        (self.e0.eval(z) + u * self.e1.eval(z), self.g0.eval(z) + u * self.g1.eval(z))
    }
}

/// Pointwise geometry of a vertical graph `z = h(θ)` at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalGeometry {
    pub e: f64,
    pub g: f64,
    /// `|∇(z − h)|`
    pub q: f64,
    /// upward unit normal, orbit-space components `(ν^θ, ν^z)`
    pub normal: [f64; 2],
    pub mean_curvature: f64,
    /// principal curvature along the meridian
    pub kappa: f64,
    /// principal curvature along the orbit (multiplicity `n − 2`)
    pub mu: f64,
    pub ric_nn: f64,
    /// Ricci eigenvalues on `TΣ`: meridian, orbit
    pub ric_t: f64,
    pub ric_v: f64,
    /// `ds² = m dθ²` along the meridian
    pub m: f64,
    pub dm: f64,
    /// orbit radius `ρ(θ, h(θ))` and its `θ`-derivative
    pub p: f64,
    pub dp: f64,
}

impl LocalGeometry {
    pub fn second_fundamental_sq(&self, n: usize) -> f64 {
        self.kappa * self.kappa + (n as f64 - 2.0) * self.mu * self.mu
    }

    /// `|A − H g/(n−1)|` on `TΣ`
    pub fn umbilic_defect(&self, n: usize) -> f64 {
        let mean = self.mean_curvature / (n as f64 - 1.0);
        ((self.kappa - mean).powi(2) + (n as f64 - 2.0) * (self.mu - mean).powi(2)).sqrt()
    }

    /// Surface density: `dμ = density · dθ · dvol_{S^{n−2}}`.
    pub fn density(&self, n: usize) -> f64 {
        self.m.sqrt() * self.p.powi(n as i32 - 2)
    }

    /// `Δ_Σ v + (|A|² + Ric(ν, ν)) v` from `v, v′, v″` in `θ`.
    pub fn jacobi(&self, n: usize, v: [f64; 3]) -> f64 {
        let k = n as f64 - 2.0;
        let lap = v[2] / self.m + v[1] * (k * self.dp / (self.p * self.m) - self.dm / (2.0 * self.m * self.m));
        lap + (self.second_fundamental_sq(n) + self.ric_nn) * v[0]
    }
}

/// Geometry at `(θ, h)` given `h′, h″`.
pub fn local_geometry(metric: &NeckMetric, theta: f64, h: [f64; 3]) -> LocalGeometry {
    let n = metric.n;
    let k = n as f64 - 2.0;
    let (c, s) = (theta.cos(), theta.sin());
    let (e0, e1) = (metric.e0.jet(h[0]), metric.e1.jet(h[0]));
    let (g0, g1) = (metric.g0.jet(h[0]), metric.g1.jet(h[0]));
    // value, ∂θ, ∂z, ∂θθ, ∂θz, ∂zz
    let part = |a: [f64; 3], b: [f64; 3]| {
        [
            a[0] + b[0] * c,
            -b[0] * s,
            a[1] + b[1] * c,
            -b[0] * c,
            -b[1] * s,
            a[2] + b[2] * c,
        ]
    };
    let ee = part(e0, e1);
    let gg = part(g0, g1);
    let (e, g) = (ee[0], gg[0]);

    let b = e.sqrt();
    let b_t = ee[1] / (2.0 * b);
    let b_z = ee[2] / (2.0 * b);
    let b3 = 4.0 * b * b * b;
    let b_tt = ee[3] / (2.0 * b) - ee[1] * ee[1] / b3;
    let b_tz = ee[4] / (2.0 * b) - ee[1] * ee[2] / b3;
    let b_zz = ee[5] / (2.0 * b) - ee[2] * ee[2] / b3;
    let rho = b * s;
    let r_t = b_t * s + b * c;
    let r_z = b_z * s;
    let r_tt = b_tt * s + 2.0 * b_t * c - b * s;
    let r_tz = b_tz * s + b_z * c;
    let r_zz = b_zz * s;

    // orbit-space Christoffels of diag(E, G), coordinates (θ, z)
    let t_tt = ee[1] / (2.0 * e);
    let z_tt = -ee[2] / (2.0 * g);
    let t_tz = ee[2] / (2.0 * e);
    let z_tz = gg[1] / (2.0 * g);
    let t_zz = -gg[1] / (2.0 * e);
    let z_zz = gg[2] / (2.0 * g);
    let hess = [
        r_tt - t_tt * r_t - z_tt * r_z,
        r_tz - t_tz * r_t - z_tz * r_z,
        r_zz - t_zz * r_t - z_zz * r_z,
    ];
    let hess_at = |a: f64, bz: f64| hess[0] * a * a + 2.0 * hess[1] * a * bz + hess[2] * bz * bz;

    let w = e * g;
    let w_t = ee[1] * g + e * gg[1];
    let w_z = ee[2] * g + e * gg[2];
    let sw = w.sqrt();
    let gauss = -(gg[3] / sw - 0.5 * gg[1] * w_t / (w * sw) + ee[5] / sw - 0.5 * ee[2] * w_z / (w * sw)) / (2.0 * sw);

    let (h1, h2) = (h[1], h[2]);
    let q = (h1 * h1 / e + 1.0 / g).sqrt();
    let q_t = (2.0 * h1 * h2 / e - h1 * h1 * ee[1] / (e * e) - gg[1] / (g * g)) / (2.0 * q);
    let q_z = (-h1 * h1 * ee[2] / (e * e) - gg[2] / (g * g)) / (2.0 * q);
    let nt = -h1 / (e * q);
    let nz = 1.0 / (g * q);
    let dnt = -h2 / (e * q) + h1 * (ee[1] * q + e * q_t) / (e * q).powi(2);
    let dnz = -(gg[2] * q + g * q_z) / (g * q).powi(2);
    let lw_t = 0.5 * (ee[1] / e + gg[1] / g) + k * r_t / rho;
    let lw_z = 0.5 * (ee[2] / e + gg[2] / g) + k * r_z / rho;
    let mean_curvature = dnt + dnz + nt * lw_t + nz * lw_z;

    let mu = (nt * r_t + nz * r_z) / rho;
    let kappa = mean_curvature - k * mu;
    let ric_nn = gauss - k * hess_at(nt, nz) / rho;
    let m = e + g * h1 * h1;
    let sm = m.sqrt();
    let ric_t = gauss - k * hess_at(1.0 / sm, h1 / sm) / rho;
    let lap_rho = hess[0] / e + hess[2] / g;
    let grad_sq = r_t * r_t / e + r_z * r_z / g;
    let ric_v = -lap_rho / rho + (k - 1.0) * (1.0 - grad_sq) / (rho * rho);
    let dm = ee[1] + ee[2] * h1 + (gg[1] + gg[2] * h1) * h1 * h1 + 2.0 * g * h1 * h2;

    LocalGeometry {
        e,
        g,
        q,
        normal: [nt, nz],
        mean_curvature,
        kappa,
        mu,
        ric_nn,
        ric_t,
        ric_v,
        m,
        dm,
        p: rho,
        dp: r_t + r_z * h1,
    }
}

/// `Σ c_k cos(kθ)` and its first two derivatives.
pub fn cosine_jet(coeffs: &[f64], theta: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, c) in coeffs.iter().enumerate() {
        let kf = k as f64;
        let (s, co) = (kf * theta).sin_cos();
        out[0] += c * co;
        out[1] -= c * kf * s;
        out[2] -= c * kf * kf * co;
    }
    out
}

/// Gauss–Chebyshev nodes `θ_j = π(j + ½)/N`.
pub fn nodes(modes: usize) -> Vec<f64> {
    (0..modes).map(|j| PI * (j as f64 + 0.5) / modes as f64).collect()
}

/// Cosine coefficients interpolating values at [`nodes`] (inverse DCT-II).
pub fn cosine_fit(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let th = nodes(m);
    (0..m)
        .map(|k| {
            let s: f64 = values.iter().zip(&th).map(|(v, t)| v * (k as f64 * t).cos()).sum();
            s * if k == 0 { 1.0 } else { 2.0 } / m as f64
        })
        .collect()
}

/// `∫_0^π f dθ` to near machine precision.
fn integrate_theta(f: impl FnMut(f64) -> f64) -> f64 {
    gauss_kronrod(f, 0.0, PI, 1e-15, 1e-14, 400).value
}

/// A vertical graph `z = z0 + f(θ)` over the slice through the basepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub n: usize,
    pub z0: f64,
    /// basepoint polar coordinate `u0 = cos θ0`
    pub u0: f64,
    /// cosine coefficients of `f`
    pub coeffs: Vec<f64>,
    pub mean_curvature: f64,
    pub area: f64,
    /// Newton residual history (sup norm)
    pub residuals: Vec<f64>,
}

impl Leaf {
    /// `h, h′, h″` at `θ`.
    pub fn height(&self, theta: f64) -> [f64; 3] {
        let mut j = cosine_jet(&self.coeffs, theta);
        j[0] += self.z0;
        j
    }

    pub fn local(&self, metric: &NeckMetric, theta: f64) -> LocalGeometry {
        local_geometry(metric, theta, self.height(theta))
    }

    /// `sup |f|` from the coefficients (an upper bound).
    pub fn graph_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }

    /// `∫_Σ F dμ` for a function of `θ` and the local geometry.
    pub fn integrate(&self, metric: &NeckMetric, mut f: impl FnMut(f64, &LocalGeometry) -> f64) -> f64 {
        let n = self.n;
        sphere_volume(n - 1)
            * integrate_theta(|t| {
                let loc = self.local(metric, t);
                f(t, &loc) * loc.density(n)
            })
    }

    /// `sup_θ |H(θ) − H|` on `samples` points, nodes excluded.
    pub fn mean_curvature_spread(&self, metric: &NeckMetric, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let t = PI * (i as f64 + 0.37) / samples as f64;
                (self.local(metric, t).mean_curvature - self.mean_curvature).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn leaf_area(metric: &NeckMetric, z0: f64, coeffs: &[f64]) -> f64 {
    let n = metric.n;
    sphere_volume(n - 1)
        * integrate_theta(|t| {
            let mut h = cosine_jet(coeffs, t);
            h[0] += z0;
            local_geometry(metric, t, h).density(n)
        })
}

/// Zonal projection of a function of `θ` onto levels 0, 1, 2 of `S^{n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalProjection {
    /// coefficients of `1`, `u`, `u² − 1/n`
    pub levels: [f64; 3],
    /// `L²(S^{n−1})` norm of the remainder
    pub residual: f64,
}

pub fn zonal_projection(n: usize, f: &dyn Fn(f64) -> f64) -> ZonalProjection {
    let w = |t: f64| t.sin().powi(n as i32 - 2);
    let nf = n as f64;
    let basis = [|_: f64| 1.0, |u: f64| u, |u: f64| u * u];
    let y = |k: usize, u: f64| if k == 2 { basis[2](u) - 1.0 / nf } else { basis[k](u) };
    let mut levels = [0.0; 3];
    for (k, l) in levels.iter_mut().enumerate() {
        let num = integrate_theta(|t| f(t) * y(k, t.cos()) * w(t));
        let den = integrate_theta(|t| y(k, t.cos()).powi(2) * w(t));
        *l = num / den;
    }
    let rest = integrate_theta(|t| {
        let u = t.cos();
        (f(t) - (0..3).map(|k| levels[k] * y(k, u)).sum::<f64>()).powi(2) * w(t)
    });
    ZonalProjection {
        levels,
        residual: (sphere_volume(n - 1) * rest.max(0.0)).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCurvature {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub projection: ZonalProjection,
}

/// Pointwise mean curvature (upward normal) of `z = z0 + f(θ)`.
pub fn mean_curvature_of_graph(metric: &NeckMetric, z0: f64, coeffs: &[f64], samples: usize) -> Result<GraphCurvature> {
    metric.check()?;
    let bound: f64 = coeffs.iter().map(|c| c.abs()).sum();
    if bound >= 1.0 || (z0.abs() + bound) > DOMAIN {
        return Err(LabError::Invalid(format!("graph leaves the embedding band (|f| up to {bound:.3})")));
    }
    let h = |t: f64| {
        let mut j = cosine_jet(coeffs, t);
        j[0] += z0;
        local_geometry(metric, t, j).mean_curvature
    };
    let thetas: Vec<f64> = (0..samples).map(|i| PI * (i as f64 + 0.5) / samples as f64).collect();
    let values = thetas.iter().map(|&t| h(t)).collect();
    Ok(GraphCurvature {
        thetas,
        values,
        projection: zonal_projection(metric.n, &h),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcOptions {
    /// cosine modes in `θ`
    pub modes: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CmcOptions {
    fn default() -> Self {
        Self {
            modes: 16,
            tol: 1e-12,
            max_iter: 30,
        }
    }
}

/// Newton's method for `(f, H)` with `H(g, f) = H` on the nodes and
/// `f(θ0) = 0`, linearized by the Jacobi operator acting on the normal speed
/// `v = δh / q`.
pub fn cmc_solve(metric: &NeckMetric, z0: f64, u0: f64, initial: Option<&[f64]>, opts: &CmcOptions) -> Result<Leaf> {
    metric.check()?;
    if z0.abs() > INTERIOR {
        return Err(LabError::Invalid(format!("basepoint height {z0} outside [-{INTERIOR}, {INTERIOR}]")));
    }
    if !(-1.0..=1.0).contains(&u0) {
        return Err(LabError::Invalid("u0 must lie in [-1, 1]".into()));
    }
    let n = metric.n;
    let m = opts.modes.max(2);
    let th = nodes(m);
    let theta0 = u0.acos().clamp(1e-6, PI - 1e-6);
    let mut c = vec![0.0; m];
    if let Some(init) = initial {
        for (ci, v) in c.iter_mut().zip(init) {
            *ci = *v;
        }
    }
    let jet = |c: &[f64], t: f64| {
        let mut j = cosine_jet(c, t);
        j[0] += z0;
        j
    };
    let mut hmean = th.iter().map(|&t| local_geometry(metric, t, jet(&c, t)).mean_curvature).sum::<f64>() / m as f64;
    let mut residuals = Vec::new();
    for it in 0..=opts.max_iter {
        let locs: Vec<LocalGeometry> = th.iter().map(|&t| local_geometry(metric, t, jet(&c, t))).collect();
        let base = local_geometry(metric, theta0, jet(&c, theta0));
        let mut r = DVector::zeros(m + 1);
        for j in 0..m {
            r[j] = locs[j].mean_curvature - hmean;
        }
        r[m] = jet(&c, theta0)[0] - z0;
        let res = r.amax();
        if !res.is_finite() {
            return Err(LabError::NewtonDiverged {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        residuals.push(res);
        if res <= opts.tol {
            let area = leaf_area(metric, z0, &c);
            return Ok(Leaf {
                n,
                z0,
                u0,
                coeffs: c,
                mean_curvature: hmean,
                area,
                residuals,
            });
        }
        if it == opts.max_iter || c.iter().map(|x| x.abs()).sum::<f64>() >= 1.0 || res > 1e3 * residuals[0].max(1e-3) {
            return Err(LabError::NewtonDiverged {
                iterations: it,
                residual: res,
            });
        }
        let mut a = DMatrix::zeros(m + 1, m + 1);
        for (j, &t) in th.iter().enumerate() {
            for k in 0..m {
                let mut e = vec![0.0; k + 1];
                e[k] = 1.0;
                a[(j, k)] = locs[j].jacobi(n, cosine_jet(&e, t));
            }
            a[(j, m)] = 1.0;
        }
        for k in 0..m {
            a[(m, k)] = base.q * (k as f64 * theta0).cos();
        }
        r[m] = -r[m];
        let sol = a.lu().solve(&r).ok_or(LabError::NewtonDiverged {
            iterations: it,
            residual: res,
        })?;
        let dh: Vec<f64> = (0..m)
            .map(|j| locs[j].q * cosine_jet(&sol.as_slice()[..m], th[j])[0])
            .collect();
        for (ci, d) in c.iter_mut().zip(cosine_fit(&dh)) {
            *ci += d;
        }
        hmean += sol[m];
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roundness {
    /// `sup |A − H g/(n−1)|` on `TΣ`
    pub umbilic: f64,
    /// `sup |Ric − ρ g|` on `TΣ` with `ρ` fitted by least squares
    pub ricci: f64,
    pub rho: f64,
    pub area: f64,
}

pub fn roundness_report(leaf: &Leaf, metric: &NeckMetric, samples: usize) -> Roundness {
    let n = leaf.n;
    let k = n as f64 - 2.0;
    let locs: Vec<LocalGeometry> = (0..samples)
        .map(|i| leaf.local(metric, PI * (i as f64 + 0.5) / samples as f64))
        .collect();
    let umbilic = locs.iter().map(|l| l.umbilic_defect(n)).fold(0.0, f64::max);
    let rho = locs.iter().map(|l| l.ric_t + k * l.ric_v).sum::<f64>() / (locs.len() as f64 * (k + 1.0));
    let ricci = locs
        .iter()
        .map(|l| ((l.ric_t - rho).powi(2) + k * (l.ric_v - rho).powi(2)).sqrt())
        .fold(0.0, f64::max);
    Roundness {
        umbilic,
        ricci,
        rho,
        area: leaf.area,
    }
}

/// `area^{−(n+1)/(n−1)} ∫_Σ ⟨Z^a, Z^b⟩ dμ` for `Z^a = standard_scale(n)·σ^a x`.
pub fn leaf_gram(leaf: &Leaf, metric: &NeckMetric, family: &RotationFamily) -> DMatrix<f64> {
    let n = leaf.n;
    let nf = n as f64;
    let big_n = family.len();
    let s2 = standard_scale(n).powi(2);
    let norm = leaf.area.powf(-(nf + 1.0) / (nf - 1.0));
    // orbit averages of x·Qx only see Q_11 and tr Q
    let (int_uu, int_rest) = {
        let a = leaf.integrate(metric, |t, l| l.e * t.cos().powi(2));
        let b = leaf.integrate(metric, |t, l| l.e * (1.0 - t.cos().powi(2)) / (nf - 1.0));
        (a, b)
    };
    DMatrix::from_fn(big_n, big_n, |a, b| {
        let q = family.mats[a].transpose() * &family.mats[b];
        let q = (&q + q.transpose()) * 0.5;
        let q11 = q[(0, 0)];
        norm * s2 * (q11 * int_uu + (q.trace() - q11) * int_rest)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationOptions {
    pub cmc: CmcOptions,
    /// spacing of the auxiliary leaves used for `s`-derivatives
    pub step: f64,
    pub base_u: f64,
}

impl Default for FoliationOptions {
    fn default() -> Self {
        Self {
            cmc: CmcOptions::default(),
            step: 0.02,
            base_u: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliatedLeaf {
    pub leaf: Leaf,
    /// lapse at the nodes, normalized so `∫_Σ v dμ = 1`
    pub lapse: Vec<f64>,
    /// normal speed per unit basepoint height (the height parametrization)
    pub lapse_height: Vec<f64>,
    /// `ds/dσ` for `σ` the basepoint height
    pub ds_dsigma: f64,
    /// half-oscillation of `Δv + (|A|² + Ric(ν,ν))v` over the nodes
    pub jacobi_residual: f64,
    /// `sup |v − area_ḡ(Σ)^{-1}|`
    pub lapse_deviation: f64,
    /// `|d area/ds − H|` by differencing neighbouring leaves
    pub area_rate_defect: f64,
    pub roundness: Roundness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Foliation {
    pub n: usize,
    pub metric: NeckMetric,
    pub leaves: Vec<FoliatedLeaf>,
    pub step: f64,
    pub base_u: f64,
}

fn five_point(f: &[f64], h: f64) -> f64 {
    (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h)
}

/// Leaves through `(u0, σ)` for `σ` evenly spaced in `band`, with the lapse
/// computed from four auxiliary leaves at `σ ± step, σ ± 2 step`.
pub fn foliate(metric: &NeckMetric, band: (f64, f64), count: usize, opts: &FoliationOptions) -> Result<Foliation> {
    metric.check()?;
    let n = metric.n;
    let count = count.max(1);
    let sigmas: Vec<f64> = (0..count)
        .map(|i| {
            if count == 1 {
                band.0
            } else {
                band.0 + (band.1 - band.0) * i as f64 / (count - 1) as f64
            }
        })
        .collect();
    let h = opts.step;
    let stencils: Vec<Vec<Leaf>> = sigmas
        .par_iter()
        .map(|&s| {
            (-2..=2)
                .map(|j| cmc_solve(metric, s + j as f64 * h, opts.base_u, None, &opts.cmc))
                .collect::<Result<Vec<Leaf>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // ordering: compare all solved leaves on a common θ grid
    let probe: Vec<f64> = (0..64).map(|i| PI * (i as f64 + 0.5) / 64.0).collect();
    let mut all: Vec<&Leaf> = stencils.iter().flatten().collect();
    all.sort_by(|a, b| a.z0.total_cmp(&b.z0));
    all.dedup_by(|a, b| (a.z0 - b.z0).abs() < 1e-12);
    for w in all.windows(2) {
        if probe.iter().any(|&t| w[1].height(t)[0] <= w[0].height(t)[0]) {
            return Err(LabError::Foliation(format!("leaves through z = {} and {} cross", w[0].z0, w[1].z0)));
        }
    }

    let m = opts.cmc.modes.max(2);
    let th = nodes(m);
    let cyl = NeckMetric::cylinder(n);
    let leaves = stencils
        .into_iter()
        .map(|st| {
            let centre = &st[2];
            let locs: Vec<LocalGeometry> = th.iter().map(|&t| centre.local(metric, t)).collect();
            let lapse_height: Vec<f64> = th
                .iter()
                .zip(&locs)
                .map(|(&t, l)| {
                    let hs: Vec<f64> = st.iter().map(|lf| lf.height(t)[0]).collect();
                    five_point(&hs, h) / l.q
                })
                .collect();
            let vc = cosine_fit(&lapse_height);
            let ds_dsigma = centre.integrate(metric, |t, _| cosine_jet(&vc, t)[0]);
            let lapse: Vec<f64> = lapse_height.iter().map(|v| v / ds_dsigma).collect();
            let coeffs: Vec<f64> = vc.iter().map(|c| c / ds_dsigma).collect();
            let jac: Vec<f64> = th
                .iter()
                .zip(&locs)
                .map(|(&t, l)| l.jacobi(n, cosine_jet(&coeffs, t)))
                .collect();
            let (lo, hi) = jac.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let area_bar = leaf_area(&cyl, centre.z0, &centre.coeffs);
            let lapse_deviation = lapse.iter().map(|v| (v - 1.0 / area_bar).abs()).fold(0.0, f64::max);
            let areas: Vec<f64> = st.iter().map(|l| l.area).collect();
            let area_rate_defect = (five_point(&areas, h) / ds_dsigma - centre.mean_curvature).abs();
            FoliatedLeaf {
                roundness: roundness_report(centre, metric, 101),
                leaf: centre.clone(),
                lapse,
                lapse_height,
                ds_dsigma,
                jacobi_residual: 0.5 * (hi - lo),
                lapse_deviation,
                area_rate_defect,
            }
        })
        .collect();
    Ok(Foliation {
        n,
        metric: metric.clone(),
        leaves,
        step: h,
        base_u: opts.base_u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCheck {
    /// `sup_{a,b} |d/ds Gram_ab|` per leaf
    pub rates: Vec<f64>,
    pub max_rate: f64,
    /// `sup |Gram − I|` per leaf
    pub deviations: Vec<f64>,
}

/// Differentiates the area-normalized Gram matrix across the auxiliary leaves.
pub fn gram_evolution_check(foliation: &Foliation, family: &RotationFamily) -> Result<GramCheck> {
    if family.n != foliation.n {
        return Err(LabError::Invalid("family dimension differs from the foliation".into()));
    }
    let metric = &foliation.metric;
    let opts = CmcOptions {
        modes: foliation.leaves.first().map_or(16, |l| l.leaf.coeffs.len()),
        ..CmcOptions::default()
    };
    let h = foliation.step;
    let big_n = family.len();
    let mut rates = Vec::new();
    let mut deviations = Vec::new();
    for fl in &foliation.leaves {
        let grams = (-2..=2)
            .map(|j| {
                let l = if j == 0 {
                    fl.leaf.clone()
                } else {
                    cmc_solve(metric, fl.leaf.z0 + j as f64 * h, foliation.base_u, None, &opts)?
                };
                Ok(leaf_gram(&l, metric, family))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for a in 0..big_n {
            for b in 0..big_n {
                let vals: Vec<f64> = grams.iter().map(|g| g[(a, b)]).collect();
                worst = worst.max((five_point(&vals, h) / fl.ds_dsigma).abs());
            }
        }
        rates.push(worst);
        deviations.push((&grams[2] - DMatrix::identity(big_n, big_n)).amax());
    }
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    Ok(GramCheck {
        rates,
        max_rate,
        deviations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapseStats {
    pub min: f64,
    pub max: f64,
    pub jacobi_residual: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafReport {
    pub z0: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub area: f64,
    pub lapse_stats: LapseStats,
    pub roundness: Roundness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationReport {
    pub leaves: Vec<LeafReport>,
    pub metric_hash: String,
}

impl Foliation {
    pub fn report(&self) -> FoliationReport {
        FoliationReport {
            leaves: self
                .leaves
                .iter()
                .map(|fl| LeafReport {
                    z0: fl.leaf.z0,
                    h: fl.leaf.mean_curvature,
                    area: fl.leaf.area,
                    lapse_stats: LapseStats {
                        min: fl.lapse.iter().cloned().fold(f64::INFINITY, f64::min),
                        max: fl.lapse.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        jacobi_residual: fl.jacobi_residual,
                        deviation: fl.lapse_deviation,
                    },
                    roundness: fl.roundness.clone(),
                })
                .collect(),
            metric_hash: self.metric.hash(),
        }
    }

    pub fn max_jacobi_residual(&self) -> f64 {
        self.leaves.iter().map(|l| l.jacobi_residual).fold(0.0, f64::max)
    }

    pub fn max_lapse_deviation(&self) -> f64 {
        self.leaves.iter().map(|l| l.lapse_deviation).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_guess(rng: &mut ChaCha8Rng, size: f64) -> Vec<f64> {
        let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let total: f64 = raw.iter().map(|c| c.abs()).sum();
        raw.iter().map(|c| c * size / total).collect()
    }

    #[test]
    fn profile_derivatives_and_products() {
        let p = ZProfile::wave(0.3, 1.7, 0.4).add(&ZProfile::cosh(0.2, 0.6));
        let q = ZProfile::constant(1.5).add(&ZProfile::wave(-0.1, 0.5, 2.0));
        let z = 0.37;
        let h = 1e-4;
        for m in 0..4 {
            let fd = (p.deriv(z + h, m) - p.deriv(z - h, m)) / (2.0 * h);
            assert!((fd - p.deriv(z, m + 1)).abs() < 1e-7);
        }
        assert_relative_eq!(p.mul(&q).eval(z), p.eval(z) * q.eval(z), epsilon = 1e-14);
        assert_relative_eq!(ZProfile::cosh(1.0, 0.3).eval(2.0), (0.6f64).cosh(), epsilon = 1e-14);
    }

    #[test]
    fn slices_of_the_cylinder_are_minimal() {
        let cyl = NeckMetric::cylinder(5);
        let gc = mean_curvature_of_graph(&cyl, 1.0, &[0.0], 17).unwrap();
        assert!(gc.values.iter().all(|h| h.abs() < 1e-15));
        assert!(gc.projection.residual < 1e-14);
    }

    #[test]
    fn warped_slices_match_area_first_variation() {
        let n = 4;
        let phi = ZProfile::constant(1.0).add(&ZProfile::wave(0.01, PI / 10.0, 0.0));
        let g = NeckMetric::warped(n, &phi);
        let z0 = 2.3;
        let gc = mean_curvature_of_graph(&g, z0, &[0.0], 9).unwrap();
        let formula = (n as f64 - 1.0) * phi.deriv(z0, 1) / phi.eval(z0);
        // oracle: d/dz log area by central differences of the quadrature area
        let h = 1e-3;
        let fd = (leaf_area(&g, z0 + h, &[0.0]).ln() - leaf_area(&g, z0 - h, &[0.0]).ln()) / (2.0 * h);
        for v in &gc.values {
            assert_relative_eq!(*v, formula, epsilon = 1e-14);
            assert!((v - fd).abs() < 1e-9);
        }
        let leaf = cmc_solve(&g, z0, 0.2, None, &CmcOptions::default()).unwrap();
        assert!(leaf.coeffs.iter().all(|c| c.abs() < 1e-13));
        assert_relative_eq!(leaf.mean_curvature, formula, epsilon = 1e-13);
    }

    #[test]
    fn tilted_slice_linearization_is_the_jacobi_operator() {
        let n = 4;
        let cyl = NeckMetric::cylinder(n);
        let d = 1e-4;
        let plus = mean_curvature_of_graph(&cyl, 0.0, &[0.0, d], 11).unwrap();
        let minus = mean_curvature_of_graph(&cyl, 0.0, &[0.0, -d], 11).unwrap();
        for (i, &t) in plus.thetas.iter().enumerate() {
            let slope = (plus.values[i] - minus.values[i]) / (2.0 * d);
            let loc = local_geometry(&cyl, t, [0.0, 0.0, 0.0]);
            let jac = -loc.jacobi(n, cosine_jet(&[0.0, 1.0], t));
            assert!((slope - jac).abs() < 1e-6);
            assert!((slope - (n as f64 - 1.0) * t.cos()).abs() < 1e-6);
        }
        assert!((plus.projection.levels[1] - (n as f64 - 1.0) * d).abs() < 1e-9);
    }

    #[test]
    fn warped_ricci_matches_closed_form() {
        let n = 5;
        let phi = ZProfile::constant(1.0).add(&ZProfile::wave(0.03, 0.8, 0.2));
        let g = NeckMetric::warped(n, &phi);
        let z = 0.6;
        let (p, p1, p2) = (phi.eval(z), phi.deriv(z, 1), phi.deriv(z, 2));
        let nf = n as f64;
        for t in [0.3, 1.2, 2.5] {
            let loc = local_geometry(&g, t, [z, 0.0, 0.0]);
            assert_relative_eq!(loc.ric_nn, -(nf - 1.0) * p2 / p, epsilon = 1e-12);
            let tangential = (nf - 2.0) * (1.0 - p1 * p1) / (p * p) - p2 / p;
            assert_relative_eq!(loc.ric_t, tangential, epsilon = 1e-12);
            assert_relative_eq!(loc.ric_v, tangential, epsilon = 1e-12);
            assert_relative_eq!(loc.mu, p1 / p, epsilon = 1e-14);
            assert_relative_eq!(loc.kappa, p1 / p, epsilon = 1e-13);
        }
    }

    #[test]
    fn cylinder_newton_converges_quadratically_and_uniquely() {
        let cyl = NeckMetric::cylinder(4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut leaves = Vec::new();
        for _ in 0..20 {
            let guess = sample_guess(&mut rng, 0.1);
            let leaf = cmc_solve(&cyl, 0.5, 0.3, Some(&guess), &CmcOptions::default()).unwrap();
            assert!(leaf.iterations() <= 10);
            assert!(*leaf.residuals.last().unwrap() <= 1e-10);
            for w in leaf.residuals.windows(2) {
                if w[0] < 1e-2 {
                    assert!(w[1] <= 10.0 * w[0] * w[0] + 1e-15, "{:?}", leaf.residuals);
                }
            }
            leaves.push(leaf);
        }
        for l in &leaves {
            assert!(l.coeffs.iter().all(|c| c.abs() < 1e-10));
            assert!(l.mean_curvature.abs() < 1e-10);
        }
    }

    #[test]
    fn perturbed_leaves_are_unique_across_starts() {
        let g = NeckMetric::standard_perturbation(4, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let leaves: Vec<Leaf> = (0..20)
            .map(|_| cmc_solve(&g, -0.4, 0.1, Some(&sample_guess(&mut rng, 0.1)), &CmcOptions::default()).unwrap())
            .collect();
        for l in &leaves[1..] {
            let spread = l.coeffs.iter().zip(&leaves[0].coeffs).map(|(a, b)| (a - b).abs()).sum::<f64>();
            assert!(spread <= 1e-8);
        }
    }

    #[test]
    fn uniform_bump_gives_flat_leaf_and_varying_bump_tilts() {
        let n = 4;
        // invariant under z ↦ 2z0 − z, so the leaf is the slice itself
        let flat = cmc_solve(&NeckMetric::sphere_bump(n, ZProfile::constant(0.01)), 0.0, 0.5, None, &CmcOptions::default()).unwrap();
        assert!(flat.coeffs.iter().all(|c| c.abs() < 1e-13));

        let g = NeckMetric::sphere_bump(n, ZProfile::wave(0.01, 1.0, -PI / 2.0));
        let coarse = cmc_solve(&g, 0.3, 0.0, None, &CmcOptions::default()).unwrap();
        let fine = cmc_solve(&g, 0.3, 0.0, None, &CmcOptions { modes: 32, ..CmcOptions::default() }).unwrap();
        assert!(coarse.coeffs[1].abs() > 1e-4);
        for (a, b) in coarse.coeffs.iter().zip(&fine.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(coarse.mean_curvature_spread(&g, 200) <= 1e-8);
    }

    #[test]
    fn admissibility_and_domain_gates() {
        let big = NeckMetric::standard_perturbation(4, 0.05);
        assert!(matches!(cmc_solve(&big, 0.0, 0.0, None, &CmcOptions::default()), Err(LabError::Inadmissible { .. })));
        let g = NeckMetric::standard_perturbation(4, 0.01);
        assert!(g.eps_hat() <= EPS0);
        assert!(cmc_solve(&g, 8.5, 0.0, None, &CmcOptions::default()).is_err());
        assert!(mean_curvature_of_graph(&g, 0.0, &[0.0, 1.2], 5).is_err());
        let starved = CmcOptions { max_iter: 1, ..CmcOptions::default() };
        let guess = [0.05, 0.05];
        assert!(matches!(cmc_solve(&g, 0.0, 0.0, Some(&guess), &starved), Err(LabError::NewtonDiverged { .. })));
    }

    #[test]
    fn cylinder_foliation_is_the_round_slicing() {
        let n = 4;
        let f = foliate(&NeckMetric::cylinder(n), (-2.0, 2.0), 5, &FoliationOptions::default()).unwrap();
        let inv_area = 1.0 / (2.0 * PI * PI);
        for fl in &f.leaves {
            assert!(fl.leaf.coeffs.iter().all(|c| c.abs() < 1e-14));
            assert!(fl.lapse.iter().all(|v| (v - inv_area).abs() < 1e-13));
            assert!(fl.jacobi_residual < 1e-12);
            assert!(fl.roundness.umbilic < 1e-12 && fl.roundness.ricci < 1e-12);
            assert!(fl.area_rate_defect < 1e-8);
        }
        let gram = gram_evolution_check(&f, &RotationFamily::canonical(n)).unwrap();
        assert!(gram.max_rate <= 1e-10);
        assert!(gram.deviations.iter().all(|d| *d < 1e-12));
    }

    #[test]
    fn perturbed_foliation_estimates() {
        let n = 4;
        let run = |d: f64| foliate(&NeckMetric::standard_perturbation(n, d), (-1.0, 1.0), 3, &FoliationOptions::default()).unwrap();
        let (big, small) = (run(0.01), run(0.001));
        for fl in &big.leaves {
            assert!(fl.leaf.mean_curvature_spread(&big.metric, 150) <= 1e-8);
            assert!(fl.jacobi_residual <= 1e-6);
            assert!(fl.area_rate_defect <= 1e-8);
        }
        let slope = (big.max_lapse_deviation() / small.max_lapse_deviation()).log10();
        assert!((slope - 1.0).abs() < 0.1, "{slope}");
        let ric = big.leaves[1].roundness.ricci / small.leaves[1].roundness.ricci;
        assert!((ric.log10() - 1.0).abs() < 0.1);
        assert!(big.leaves.iter().all(|l| l.roundness.umbilic <= 0.01));
        let gram = gram_evolution_check(&big, &RotationFamily::canonical(n)).unwrap();
        assert!(gram.max_rate <= 0.01);
        let json = serde_json::to_value(big.report()).unwrap();
        assert!(json["leaves"][0]["H"].is_number() && json["metric_hash"].is_string());
    }

    #[test]
    fn even_warp_is_umbilic_at_the_centre() {
        let g = NeckMetric::warped(4, &ZProfile::cosh(1.0, 0.01));
        let leaf = cmc_solve(&g, 0.0, 0.0, None, &CmcOptions::default()).unwrap();
        assert!(roundness_report(&leaf, &g, 51).umbilic <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn leaves_are_ordered_by_base_height(delta in 0.0f64..0.01, z in -3.0f64..3.0) {
            let g = NeckMetric::standard_perturbation(5, delta);
            let a = cmc_solve(&g, z, 0.0, None, &CmcOptions::default()).unwrap();
            let b = cmc_solve(&g, z + 0.05, 0.0, None, &CmcOptions::default()).unwrap();
            for i in 0..40 {
                let t = PI * (i as f64 + 0.5) / 40.0;
                prop_assert!(b.height(t)[0] > a.height(t)[0]);
            }
        }

        #[test]
        fn cosine_fit_inverts_evaluation(c in prop::collection::vec(-1.0f64..1.0, 8)) {
            let th = nodes(8);
            let vals: Vec<f64> = th.iter().map(|&t| cosine_jet(&c, t)[0]).collect();
            for (a, b) in cosine_fit(&vals).iter().zip(&c) {
                prop_assert!((a - b).abs() < 1e-13);
            }
        }
    }
}

//! Neck rescaling, `C^k` distance to the shrinking cylinder, and the three
//! ε-symmetry deficits of a family of vector fields.
//!
//! A sample stores relative data `ĝ(τ) = G dζ² + ρ²(τ) E g_S` with
//! `ρ²(τ) = −2(n−2)τ` and `E, G` taken from a [`NeckMetric`]. At data scale `s`
//! the physical metric is `g(t) = s² ĝ((t − t̄)/s² + t_n + offset)` in the
//! coordinate `ζ = center + (z − z̄)/s`, so `x̄` sits at `ζ = center`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmc::{cmc_solve, CmcOptions, Leaf, NeckMetric, ZProfile};
use crate::error::{LabError, Result};
use crate::lichnerowicz::{conformal_killing_removal, growing_norm_exponent, TrigHeat};
use crate::poly::Poly;
use crate::quad::gauss_legendre;
use crate::sphere::{
    monomial_integral, sample_sphere, sphere_volume, standard_scale, Ambient, RotationFamily, Space, VectorField,
};
use crate::warped::reference_time;

/// Lattice spacing in `ζ` for the `C^k` distance.
const LATTICE: f64 = 0.01;
/// Highest derivative order entering the `C^k` distance.
const MAX_ORDER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckSample {
    pub n: usize,
    /// relative profile `E, G`; the shrinking cylinder has `E = G = 1`
    pub profile: NeckMetric,
    /// scale `s` of the data
    pub data_scale: f64,
    /// rescaling scale `r`, meant to satisfy `R(x̄, t̄) = (n−1)(n−2) r^{−2}`
    pub r: f64,
    /// data coordinate `ζ` of `x̄`
    pub center: f64,
    /// `t̄` sits at data time `t_n + time_offset`
    pub time_offset: f64,
    /// physical time available before `t̄`
    pub depth: f64,
    /// physical half-length in `z` available around `x̄`
    pub half_length: f64,
}

impl NeckSample {
    /// Unit-scale data around `ζ = 0, τ = t_n` with a window of 100 in both directions.
    pub fn new(profile: NeckMetric) -> Self {
        Self {
            n: profile.n,
            profile,
            data_scale: 1.0,
            r: 1.0,
            center: 0.0,
            time_offset: 0.0,
            depth: 100.0,
            half_length: 100.0,
        }
    }

    pub fn cylinder(n: usize) -> Self {
        Self::new(NeckMetric::cylinder(n))
    }

    /// The same data with the metric scaled by `c²` and `r` by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data_scale: self.data_scale * c,
            r: self.r * c,
            depth: self.depth * c * c,
            half_length: self.half_length * c,
            ..self.clone()
        }
    }

    /// Moves `t̄` later by `dt` in data time, with `r` following the cylinder
    /// radius there and the window growing by the elapsed time.
    pub fn shifted_in_time(&self, dt: f64) -> Self {
        let t_n = reference_time(self.n);
        let (old, new) = (t_n + self.time_offset, t_n + self.time_offset + dt);
        Self {
            time_offset: self.time_offset + dt,
            r: self.r * (new / old).sqrt(),
            depth: self.depth + dt * self.data_scale * self.data_scale,
            ..self.clone()
        }
    }

    pub fn with_window(&self, depth: f64, half_length: f64) -> Self {
        Self {
            depth,
            half_length,
            ..self.clone()
        }
    }
}

/// `ĝ(τ) = r^{−2} g(r²(τ − t_n) + t̄)` in `ζ' = (z − z̄)/r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledNeck {
    pub n: usize,
    /// `a = r/s`
    pub ratio: f64,
    pub profile: NeckMetric,
    pub center: f64,
    pub time_offset: f64,
    /// rescaled time available before `t_n`
    pub depth: f64,
    /// rescaled half-length in `ζ'`
    pub half_length: f64,
}

pub fn neck_rescale(sample: &NeckSample) -> Result<RescaledNeck> {
    let n = sample.n;
    if n < 3 || sample.profile.n != n {
        return Err(LabError::Dimension { got: n, need: ">= 3" });
    }
    if !(sample.r > 0.0 && sample.data_scale > 0.0) {
        return Err(LabError::Invalid("scales must be positive".into()));
    }
    if !(sample.depth >= 0.0 && sample.half_length >= 0.0) {
        return Err(LabError::Invalid("window extents must be nonnegative".into()));
    }
    let t = reference_time(n) + sample.time_offset;
    if t >= 0.0 {
        return Err(LabError::NonNegativeTime { t });
    }
    let r2 = sample.r * sample.r;
    Ok(RescaledNeck {
        n,
        ratio: sample.r / sample.data_scale,
        profile: sample.profile.clone(),
        center: sample.center,
        time_offset: sample.time_offset,
        depth: sample.depth / r2,
        half_length: sample.half_length / sample.r,
    })
}

impl RescaledNeck {
    pub fn t_n(&self) -> f64 {
        reference_time(self.n)
    }

    /// `ρ(τ)` of the comparison cylinder `ḡ(τ)`.
    pub fn background_radius(&self, tau: f64) -> f64 {
        (-2.0 * (self.n as f64 - 2.0) * tau).sqrt()
    }

    fn data_time(&self, tau: f64) -> f64 {
        let t_n = self.t_n();
        self.ratio * self.ratio * (tau - t_n) + t_n + self.time_offset
    }

    /// `ρ²(τ_data) / (a² ρ²(τ))`, the sphere factor relative to `ḡ(τ)`.
    fn radius_ratio(&self, tau: f64) -> f64 {
        self.data_time(tau) / (self.ratio * self.ratio * tau)
    }

    fn stretch(&self, p: &ZProfile) -> ZProfile {
        p.shift(self.center).dilate(self.ratio)
    }

    /// The metric at rescaled time `τ` as `G dζ'² + E g_S` (`E` includes the radius).
    pub fn slice(&self, tau: f64) -> Result<NeckMetric> {
        let t_n = self.t_n();
        if tau > t_n + 1e-12 || tau < t_n - self.depth - 1e-9 {
            return Err(LabError::Window {
                needed: t_n - tau,
                have: self.depth,
            });
        }
        let td = self.data_time(tau);
        if td >= 0.0 {
            return Err(LabError::NonNegativeTime { t: td });
        }
        let k = -2.0 * (self.n as f64 - 2.0) * td / (self.ratio * self.ratio);
        Ok(NeckMetric {
            n: self.n,
            g0: self.stretch(&self.profile.g0),
            g1: self.stretch(&self.profile.g1),
            e0: self.stretch(&self.profile.e0).scale(k),
            e1: self.stretch(&self.profile.e1).scale(k),
        })
    }

    fn check_reach(&self, reach: f64) -> Result<()> {
        let have = self.depth.min(self.half_length);
        if reach > have * (1.0 + 1e-12) {
            return Err(LabError::Window { needed: reach, have });
        }
        Ok(())
    }

    /// Derivatives `0..=10` of `(G0, G1, E0, E1)` (before the radius factor) on
    /// the `ζ'` lattice within `reach`.
    fn jets(&self, reach: f64) -> Vec<(f64, [[f64; 4]; MAX_ORDER + 1])> {
        let profiles = [
            self.stretch(&self.profile.g0),
            self.stretch(&self.profile.g1),
            self.stretch(&self.profile.e0),
            self.stretch(&self.profile.e1),
        ];
        let half = (reach / LATTICE + 1e-9).floor() as i64;
        (-half..=half)
            .into_par_iter()
            .map(|j| {
                let z = j as f64 * LATTICE;
                let mut d = [[0.0; 4]; MAX_ORDER + 1];
                for (l, row) in d.iter_mut().enumerate() {
                    for (slot, p) in row.iter_mut().zip(&profiles) {
                        *slot = p.deriv(z, l as u32);
                    }
                }
                (z.abs(), d)
            })
            .collect()
    }

    /// `sup_{l ≤ k} |∂^l(G − 1)| + √(n−1)|∂^l(ρ̃²E/ρ² − 1)|` on the lattice, with
    /// level-one parts counted by absolute value; `τ` only enters through a
    /// linear factor, so its two endpoints suffice.
    fn scan(&self, jets: &[(f64, [[f64; 4]; MAX_ORDER + 1])], eps: f64) -> f64 {
        let reach = 1.0 / eps;
        let k = (reach.floor() as usize).min(MAX_ORDER);
        let w = ((self.n - 1) as f64).sqrt();
        let t_n = self.t_n();
        let ratios = [self.radius_ratio(t_n), self.radius_ratio(t_n - reach)];
        let mut worst: f64 = 0.0;
        for (az, d) in jets {
            if *az > reach + 1e-12 {
                continue;
            }
            for (l, row) in d.iter().enumerate().take(k + 1) {
                let one = if l == 0 { 1.0 } else { 0.0 };
                let g = (row[0] - one).abs() + row[1].abs();
                for &q in &ratios {
                    worst = worst.max(g + w * ((q * row[2] - one).abs() + q * row[3].abs()));
                }
            }
        }
        worst
    }

    /// `C^{[1/ε]}` distance to `ḡ` over `[t_n − 1/ε, t_n] × {|ζ'| ≤ 1/ε}`.
    pub fn distance(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(LabError::Invalid("epsilon must be positive".into()));
        }
        self.check_reach(1.0 / eps)?;
        Ok(self.scan(&self.jets(1.0 / eps), eps))
    }

    /// Smallest `ε` with `distance(ε) ≤ ε` that the window supports; `None` when
    /// not even `ε = 1` qualifies.
    pub fn qualifying_epsilon(&self) -> Result<Option<f64>> {
        let reach = self.depth.min(self.half_length);
        if reach < 1.0 {
            return Err(LabError::Window { needed: 1.0, have: reach });
        }
        let jets = self.jets(reach);
        let ok = |e: f64| self.scan(&jets, e) <= e;
        let floor = 1.0 / reach;
        if ok(floor) {
            return Ok(Some(floor));
        }
        if !ok(1.0) {
            return Ok(None);
        }
        let (mut lo, mut hi) = (floor, 1.0);
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    }
}

// ---------------------------------------------------------------------------
// Deficits

/// Largest `n` for which the deficits are available.
const MAX_N: usize = 7;
const JD: usize = MAX_N + 1;

/// Second-order jet in the ambient coordinates `(x, ζ)`: value, gradient, Hessian.
#[derive(Debug, Clone, Copy)]
struct Jet2 {
    v: f64,
    g: [f64; JD],
    h: [[f64; JD]; JD],
}

impl Jet2 {
    const ZERO: Self = Self {
        v: 0.0,
        g: [0.0; JD],
        h: [[0.0; JD]; JD],
    };

    fn constant(c: f64) -> Self {
        Self { v: c, ..Self::ZERO }
    }

    fn var(i: usize, x: f64) -> Self {
        let mut j = Self::constant(x);
        j.g[i] = 1.0;
        j
    }

    /// `f(ζ)` from `[f, f′, f″]`, with `ζ` the coordinate `i`.
    fn of_coordinate(i: usize, f: [f64; 3]) -> Self {
        let mut j = Self::constant(f[0]);
        j.g[i] = f[1];
        j.h[i][i] = f[2];
        j
    }

    fn scale(self, s: f64) -> Self {
        let mut o = self;
        o.v *= s;
        for a in 0..JD {
            o.g[a] *= s;
            for b in 0..JD {
                o.h[a][b] *= s;
            }
        }
        o
    }
}

impl std::ops::Add for Jet2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut r = self;
        r.v += o.v;
        for a in 0..JD {
            r.g[a] += o.g[a];
            for b in 0..JD {
                r.h[a][b] += o.h[a][b];
            }
        }
        r
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-1.0)
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Self::constant(self.v * o.v);
        for a in 0..JD {
            r.g[a] = self.v * o.g[a] + o.v * self.g[a];
            for b in 0..JD {
                r.h[a][b] = self.v * o.h[a][b] + o.v * self.h[a][b] + self.g[a] * o.g[b] + o.g[a] * self.g[b];
            }
        }
        r
    }
}

/// Powers `x_i^k` of the coordinate jets, `k ≤ max_degree`.
struct Powers(Vec<Vec<Jet2>>);

impl Powers {
    fn new(p: &[f64], max_degree: usize) -> Self {
        Self(
            p.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let v = Jet2::var(i, x);
                    let mut row = vec![Jet2::constant(1.0)];
                    for k in 0..max_degree {
                        row.push(row[k] * v);
                    }
                    row
                })
                .collect(),
        )
    }

    fn coord(&self, i: usize) -> Jet2 {
        self.0[i][1]
    }

    fn eval(&self, poly: &Poly) -> Jet2 {
        poly.terms().fold(Jet2::ZERO, |acc, (e, c)| {
            let mut t = Jet2::constant(*c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t * self.0[i][k as usize];
                }
            }
            acc + t
        })
    }
}

/// A vector field as jets of its components `U_i` and Jacobian `J[i][j] = ∂_j U_i`.
type JetField<'a> = Box<dyn Fn(&Powers) -> (Vec<Jet2>, Vec<Vec<Jet2>>) + Send + Sync + 'a>;

fn poly_field(v: &VectorField) -> JetField<'static> {
    let comps = v.comps.clone();
    let jac = v.jacobian();
    Box::new(move |pw: &Powers| {
        let u = comps.iter().map(|c| pw.eval(c)).collect();
        let j = jac.iter().map(|row| row.iter().map(|c| pw.eval(c)).collect()).collect();
        (u, j)
    })
}

fn max_degree(family: &[VectorField]) -> usize {
    family.iter().flat_map(|f| f.comps.iter().map(|c| c.degree())).max().unwrap_or(0) + 1
}

/// `c·standard_scale(n)·σ^a x` for the canonical basis of `so(n)`.
pub fn standard_family(n: usize) -> Vec<VectorField> {
    RotationFamily::canonical(n).fields(Space::cylinder(n), standard_scale(n))
}

fn projector(x: &[f64], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] -= x[i] * x[j];
        }
    }
    p
}

/// Applies `mats[k]` to slot `k` of a flattened tensor in dimension `d`.
fn contract(t: &[f64], mats: &[&DMatrix<f64>]) -> Vec<f64> {
    let rank = mats.len() as u32;
    let d = mats[0].nrows();
    let mut cur = t.to_vec();
    for (ax, m) in mats.iter().enumerate() {
        let stride = d.pow(rank - 1 - ax as u32);
        let mut out = vec![0.0; cur.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / stride) % d;
            let base = idx - i * stride;
            *o = (0..d).map(|k| m[(i, k)] * cur[base + k * stride]).sum();
        }
        cur = out;
    }
    cur
}

fn weighted_sq(t: &[f64], rank: u32, w: &[f64]) -> f64 {
    let d = w.len();
    t.iter()
        .enumerate()
        .map(|(idx, v)| {
            let mut f = *v;
            let mut rest = idx;
            for _ in 0..rank {
                f *= w[rest % d];
                rest /= d;
            }
            f * f
        })
        .sum()
}

/// `Σ_a Σ_{l ≤ 2} r^{2l} |D^l L_{U^a} g|²` at one point. `D` and the norms are
/// those of the comparison cylinder of radius `radius`; the metric is extended
/// off the cylinder as `G(x_1, ζ) dζ² + E(x_1, ζ)(I − xxᵀ)`.
struct LieDeficit<'a> {
    metric: &'a NeckMetric,
    fields: &'a [JetField<'a>],
    degree: usize,
    radius: f64,
    r: f64,
}

impl LieDeficit<'_> {
    /// Jets of `P (L_U ĝ) P` for every field, flattened row-major.
    fn lie_jets(&self, pw: &Powers, p: &[f64]) -> Vec<Vec<Jet2>> {
        let m = self.metric;
        let n = m.n;
        let d = n + 1;
        let z = p[n];
        let prof = |f: &ZProfile, o: u32| Jet2::of_coordinate(n, [f.deriv(z, o), f.deriv(z, o + 1), f.deriv(z, o + 2)]);
        let u = pw.coord(0);
        let e = prof(&m.e0, 0) + u * prof(&m.e1, 0);
        let g = prof(&m.g0, 0) + u * prof(&m.g1, 0);
        let e_z = prof(&m.e0, 1) + u * prof(&m.e1, 1);
        let g_z = prof(&m.g0, 1) + u * prof(&m.g1, 1);
        let (e1, g1) = (prof(&m.e1, 0), prof(&m.g1, 0));
        let x: Vec<Jet2> = (0..n).map(|i| pw.coord(i)).collect();
        let mut proj = vec![Jet2::ZERO; d * d];
        for i in 0..n {
            for j in 0..n {
                proj[i * d + j] = Jet2::constant(if i == j { 1.0 } else { 0.0 }) - x[i] * x[j];
            }
        }
        proj[d * d - 1] = Jet2::constant(1.0);
        let mut gm = vec![Jet2::ZERO; d * d];
        for i in 0..n {
            for j in 0..n {
                gm[i * d + j] = e * proj[i * d + j];
            }
        }
        gm[d * d - 1] = g;
        let mut dg = Vec::with_capacity(d);
        for k in 0..n {
            let mut t = vec![Jet2::ZERO; d * d];
            if k == 0 {
                for i in 0..n {
                    for j in 0..n {
                        t[i * d + j] = e1 * proj[i * d + j];
                    }
                }
                t[d * d - 1] = g1;
            }
            for i in 0..n {
                t[k * d + i] = t[k * d + i] - e * x[i];
                t[i * d + k] = t[i * d + k] - e * x[i];
            }
            dg.push(t);
        }
        let mut t = vec![Jet2::ZERO; d * d];
        for i in 0..n {
            for j in 0..n {
                t[i * d + j] = e_z * proj[i * d + j];
            }
        }
        t[d * d - 1] = g_z;
        dg.push(t);

        self.fields
            .iter()
            .map(|f| {
                let (uu, jj) = f(pw);
                let mut l = vec![Jet2::ZERO; d * d];
                for i in 0..d {
                    for j in 0..d {
                        let mut s = Jet2::ZERO;
                        for k in 0..d {
                            s = s + uu[k] * dg[k][i * d + j] + jj[k][i] * gm[k * d + j] + gm[i * d + k] * jj[k][j];
                        }
                        l[i * d + j] = s;
                    }
                }
                let mut pl = vec![Jet2::ZERO; d * d];
                for i in 0..d {
                    for j in 0..d {
                        pl[i * d + j] = (0..d).fold(Jet2::ZERO, |acc, a| acc + proj[i * d + a] * l[a * d + j]);
                    }
                }
                let mut plp = vec![Jet2::ZERO; d * d];
                for i in 0..d {
                    for j in 0..d {
                        plp[i * d + j] = (0..d).fold(Jet2::ZERO, |acc, b| acc + pl[i * d + b] * proj[b * d + j]);
                    }
                }
                plp
            })
            .collect()
    }

    fn at(&self, p: &[f64]) -> f64 {
        let n = self.metric.n;
        let d = n + 1;
        let pw = Powers::new(p, self.degree.max(2));
        let p0 = projector(p, n);
        // ∂_l P
        let dp: Vec<DMatrix<f64>> = (0..d)
            .map(|l| {
                let mut m = DMatrix::zeros(d, d);
                if l < n {
                    for a in 0..n {
                        m[(l, a)] -= p[a];
                        m[(a, l)] -= p[a];
                    }
                }
                m
            })
            .collect();
        let mut w = vec![1.0 / self.radius; d];
        w[n] = 1.0;
        let r2 = self.r * self.r;
        let mut total = 0.0;
        for t in self.lie_jets(&pw, p) {
            let t0: Vec<f64> = t.iter().map(|j| j.v).collect();
            // slots (m, i, j) and (l, m, i, j), derivative slots first
            let mut grad = vec![0.0; d * d * d];
            let mut hess = vec![0.0; d * d * d * d];
            for m in 0..d {
                for ij in 0..d * d {
                    grad[m * d * d + ij] = t[ij].g[m];
                    for l in 0..d {
                        hess[(l * d + m) * d * d + ij] = t[ij].h[l][m];
                    }
                }
            }
            let t1 = contract(&grad, &[&p0, &p0, &p0]);
            let mut dt1 = Vec::with_capacity(d.pow(4));
            for (l, dpl) in dp.iter().enumerate() {
                let own = &hess[l * d * d * d..(l + 1) * d * d * d];
                let mut s = contract(own, &[&p0, &p0, &p0]);
                for mats in [[dpl, &p0, &p0], [&p0, dpl, &p0], [&p0, &p0, dpl]] {
                    for (a, b) in s.iter_mut().zip(contract(&grad, &mats)) {
                        *a += b;
                    }
                }
                dt1.extend(s);
            }
            let t2 = contract(&dt1, &[&p0, &p0, &p0, &p0]);
            total += weighted_sq(&t0, 2, &w) + r2 * weighted_sq(&t1, 3, &w) + r2 * r2 * weighted_sq(&t2, 4, &w);
        }
        total
    }

    /// Field values at `p`.
    fn values(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let pw = Powers::new(p, self.degree.max(2));
        self.fields.iter().map(|f| f(&pw).0.iter().map(|j| j.v).collect()).collect()
    }
}

/// Sampling of the parabolic window `[t_n − depth, t_n] × {|ζ'| ≤ half_length}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryWindow {
    pub depth: f64,
    pub half_length: f64,
    pub times: usize,
    pub heights: usize,
    /// meridian samples per leaf
    pub angles: usize,
    /// orbit samples per meridian point
    pub orbit_points: usize,
    pub seed: u64,
}

impl Default for SymmetryWindow {
    fn default() -> Self {
        Self {
            depth: 100.0,
            half_length: 100.0,
            times: 3,
            heights: 5,
            angles: 6,
            orbit_points: 3,
            seed: 0,
        }
    }
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![b],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `[deficit₁, deficit₂, deficit₃]`, squared convention
    pub deficits: [f64; 3],
    /// `√max` of the deficits
    pub epsilon: f64,
    pub window: SymmetryWindow,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub leaves: usize,
}

impl SymmetryReport {
    fn new(deficits: [f64; 3], window: SymmetryWindow, leaves: usize) -> Self {
        let worst = deficits.iter().fold(0.0f64, |a, b| a.max(*b));
        Self {
            deficits,
            epsilon: worst.sqrt(),
            window,
            l: None,
            leaves,
        }
    }
}

/// `∫_{S^{n−2}} P(cos θ, sin θ·y, ζ) dy`
fn orbit_integral(p: &Poly, theta: f64, zeta: f64) -> f64 {
    let n = p.nvars() - 1;
    let (c, s) = (theta.cos(), theta.sin());
    p.terms()
        .map(|(e, coef)| {
            let rest: i32 = e[1..n].iter().map(|&k| k as i32).sum();
            let m = monomial_integral(&e[1..n]);
            if m == 0.0 {
                0.0
            } else {
                coef * c.powi(e[0] as i32) * s.powi(rest) * zeta.powi(e[n] as i32) * m
            }
        })
        .sum()
}

/// The leaf through `(u = 0, ζ_c)` of the slice, solved in units of `ρ`.
fn unit_metric(slice: &NeckMetric, zc: f64, rho: f64) -> NeckMetric {
    let map = |p: &ZProfile| p.shift(zc).dilate(rho);
    NeckMetric {
        n: slice.n,
        g0: map(&slice.g0),
        g1: map(&slice.g1),
        e0: map(&slice.e0).scale(1.0 / (rho * rho)),
        e1: map(&slice.e1).scale(1.0 / (rho * rho)),
    }
}

struct LeafDeficits {
    lie: f64,
    normal: f64,
    gram: f64,
}

#[allow(clippy::too_many_arguments)]
fn leaf_deficits(
    slice: &NeckMetric,
    unit: &NeckMetric,
    leaf: &Leaf,
    zc: f64,
    rho: f64,
    family: &[VectorField],
    jets: &[JetField],
    window: &SymmetryWindow,
) -> LeafDeficits {
    let n = slice.n;
    let nf = n as f64;
    let lie = LieDeficit {
        metric: slice,
        fields: jets,
        degree: max_degree(family),
        radius: rho,
        r: 1.0,
    };
    let ys = sample_sphere(n - 1, window.orbit_points.max(1), window.seed);
    let mut worst_lie: f64 = 0.0;
    let mut worst_normal: f64 = 0.0;
    for j in 0..window.angles.max(1) {
        let theta = PI * (j as f64 + 0.5) / window.angles.max(1) as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let loc = leaf.local(unit, theta);
        let zeta = zc + rho * leaf.height(theta)[0];
        for y in &ys {
            let mut p = Vec::with_capacity(n + 1);
            p.push(c);
            p.extend(y.iter().map(|v| s * v));
            p.push(zeta);
            // ⟨U, ν⟩_g = ρ (E (U·∂_θ) ν^θ + G U^ζ ν^w / ρ) with ∂_θ = (u x − e_1)/sin θ
            let normal: f64 = lie
                .values(&p)
                .iter()
                .map(|u| {
                    let dot_x: f64 = (0..n).map(|i| u[i] * p[i]).sum::<f64>() * c - u[0];
                    let ip = rho * (loc.e * dot_x / s * loc.normal[0] + loc.g * u[n] / rho * loc.normal[1]);
                    ip * ip
                })
                .sum();
            worst_normal = worst_normal.max(normal);
            worst_lie = worst_lie.max(lie.at(&p));
        }
    }

    let big_n = family.len();
    let d = n + 1;
    let dots: Vec<Vec<(Poly, Poly)>> = (0..big_n)
        .map(|a| {
            (0..big_n)
                .map(|b| {
                    let x = (0..n).fold(Poly::zero(d), |acc, i| &acc + &(&family[a].comps[i] * &family[b].comps[i]));
                    (x, &family[a].comps[n] * &family[b].comps[n])
                })
                .collect()
        })
        .collect();
    let (nodes, weights) = gauss_legendre(64, 0.0, PI);
    let mut ints = DMatrix::zeros(big_n, big_n);
    let mut area = 0.0;
    for (&t, &w) in nodes.iter().zip(&weights) {
        let loc = leaf.local(unit, t);
        let dens = w * loc.density(n);
        let zeta = zc + rho * leaf.height(t)[0];
        area += dens;
        let e = rho * rho * loc.e;
        for a in 0..big_n {
            for b in a..big_n {
                let (x, z) = &dots[a][b];
                let v = dens * (e * orbit_integral(x, t, zeta) + loc.g * orbit_integral(z, t, zeta));
                ints[(a, b)] += v;
                if a != b {
                    ints[(b, a)] += v;
                }
            }
        }
    }
    let area = area * sphere_volume(n - 1) * rho.powi(n as i32 - 1);
    let gram = ints * rho.powi(n as i32 - 1) * area.powf(-(nf + 1.0) / (nf - 1.0));
    let gram_deficit = (DMatrix::identity(big_n, big_n) - gram).iter().map(|v| v * v).sum();
    LeafDeficits {
        lie: worst_lie,
        normal: worst_normal,
        gram: gram_deficit,
    }
}

fn check_family(n: usize, family: &[VectorField]) -> Result<()> {
    if family.is_empty() {
        return Err(LabError::Invalid("family is empty".into()));
    }
    if family.iter().any(|f| f.space.kind != Ambient::Cylinder || f.space.n != n) {
        return Err(LabError::Invalid(format!("family must live on the cylinder over S^{}", n - 1)));
    }
    Ok(())
}

/// The three deficits over the window, with `ν` and the leaves from the CMC
/// foliation of each time slice. Fields are given in the rescaled coordinates
/// `(x, ζ')`.
pub fn symmetry_deficit(sample: &NeckSample, family: &[VectorField], window: &SymmetryWindow) -> Result<SymmetryReport> {
    let neck = neck_rescale(sample)?;
    let n = neck.n;
    check_family(n, family)?;
    if neck.depth < window.depth * (1.0 - 1e-12) {
        return Err(LabError::Window {
            needed: window.depth,
            have: neck.depth,
        });
    }
    if neck.half_length < window.half_length * (1.0 - 1e-12) {
        return Err(LabError::Window {
            needed: window.half_length,
            have: neck.half_length,
        });
    }
    let t_n = neck.t_n();
    let mut cells = Vec::new();
    let heights = if window.heights <= 1 {
        vec![0.0]
    } else {
        linspace(-window.half_length, window.half_length, window.heights)
    };
    for tau in linspace(t_n - window.depth, t_n, window.times.max(1)) {
        for &zc in &heights {
            cells.push((tau, zc));
        }
    }
    let opts = CmcOptions::default();
    let per_leaf: Vec<LeafDeficits> = cells
        .par_iter()
        .map(|&(tau, zc)| {
            let slice = neck.slice(tau)?;
            let rho = neck.background_radius(tau);
            let unit = unit_metric(&slice, zc, rho);
            let leaf = cmc_solve(&unit, 0.0, 0.0, None, &opts)
                .map_err(|e| LabError::Foliation(format!("no CMC leaf at τ = {tau}, ζ = {zc}: {e}")))?;
            let jets: Vec<JetField> = family.iter().map(poly_field).collect();
            Ok(leaf_deficits(&slice, &unit, &leaf, zc, rho, family, &jets, window))
        })
        .collect::<Result<_>>()?;
    let deficits = per_leaf.iter().fold([0.0f64; 3], |acc, d| {
        [acc[0].max(d.lie), acc[1].max(d.normal), acc[2].max(d.gram)]
    });
    Ok(SymmetryReport::new(deficits, window.clone(), per_leaf.len()))
}

/// Largest `|Δ deficit| / step` over shifts of `x̄` by `step` in `ζ` and of `t̄`
/// by `step` in data time.
pub fn deficit_lipschitz(
    sample: &NeckSample,
    family: &[VectorField],
    window: &SymmetryWindow,
    step: f64,
) -> Result<[f64; 3]> {
    let base = symmetry_deficit(sample, family, window)?;
    let moved = [
        NeckSample {
            center: sample.center + step,
            ..sample.clone()
        },
        sample.shifted_in_time(step),
    ];
    let mut out = [0.0f64; 3];
    for s in &moved {
        let rep = symmetry_deficit(s, family, window)?;
        for k in 0..3 {
            out[k] = out[k].max((rep.deficits[k] - base.deficits[k]).abs() / step);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Improvement harness

/// `δ·c(z, t)∇_S(ψ_a·x)` added to the `a`-th standard field, with
/// `c = (−t)^{−(n−3)/(2(n−2))} ĉ` normalized to `ĉ` at the initial time and
/// `ĉ` caloric. Wavenumbers of `profile` are in units of `L^{−1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub delta: f64,
    pub psi: Vec<Vec<f64>>,
    pub profile: TrigHeat,
}

impl Contamination {
    pub fn random(n: usize, count: usize, delta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = (0..count)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let waves = (0..2)
            .map(|_| {
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(0.5..1.5),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        Self {
            delta,
            psi,
            profile: TrigHeat {
                constant: 1.0,
                waves,
            },
        }
    }

    /// `ψ̃_b = Σ_a ω_ab ψ_a`, matching [`RotationFamily::conjugated`].
    pub fn mixed(&self, omega: &DMatrix<f64>) -> Self {
        let big_n = self.psi.len();
        let n = self.psi.first().map_or(0, |p| p.len());
        let psi = (0..big_n)
            .map(|b| (0..n).map(|i| (0..big_n).map(|a| omega[(a, b)] * self.psi[a][i]).sum()).collect())
            .collect();
        Self {
            psi,
            ..self.clone()
        }
    }

    /// `∂_z^order c` at `(z, t)` for the window length `l`.
    fn coefficient(&self, n: usize, l: f64, z: f64, t: f64, order: u32) -> f64 {
        let t0 = -l;
        let e = growing_norm_exponent(n);
        let growth = ((-t) / (-t0)).powf(e);
        let mut v = if order == 0 { self.profile.constant } else { 0.0 };
        for [a, kappa, phase] in &self.profile.waves {
            let k = kappa / l.sqrt();
            v += a
                * (-k * k * (t - t0)).exp()
                * k.powi(order as i32)
                * (k * z + phase + order as f64 * std::f64::consts::FRAC_PI_2).cos();
        }
        self.delta * growth * v
    }
}

/// `c(z)∇_S(ψ·x)` with `coef(z, m) = ∂_z^m c`.
fn gradient_field<'a>(psi: Vec<f64>, coef: impl Fn(f64, u32) -> f64 + Send + Sync + 'a) -> JetField<'a> {
    Box::new(move |pw: &Powers| {
        let n = psi.len();
        let d = n + 1;
        let z = pw.0[n][1].v;
        let c = Jet2::of_coordinate(n, [coef(z, 0), coef(z, 1), coef(z, 2)]);
        let dc = Jet2::of_coordinate(n, [coef(z, 1), coef(z, 2), coef(z, 3)]);
        let x: Vec<Jet2> = (0..n).map(|i| pw.coord(i)).collect();
        let px = (0..n).fold(Jet2::ZERO, |acc, i| acc + x[i].scale(psi[i]));
        let mut u = vec![Jet2::ZERO; d];
        let mut j = vec![vec![Jet2::ZERO; d]; d];
        for i in 0..n {
            let g = Jet2::constant(psi[i]) - px * x[i];
            u[i] = c * g;
            j[i][n] = dc * g;
            for k in 0..n {
                let mut inner = x[i].scale(psi[k]);
                if i == k {
                    inner = inner + px;
                }
                j[i][k] = (c * inner).scale(-1.0);
            }
        }
        (u, j)
    })
}

/// `Σ_k s_k U_k`
fn combined<'a>(parts: Vec<(f64, JetField<'a>)>) -> JetField<'a> {
    Box::new(move |pw: &Powers| {
        let mut acc: Option<(Vec<Jet2>, Vec<Vec<Jet2>>)> = None;
        for (s, f) in &parts {
            let (u, j) = f(pw);
            acc = Some(match acc {
                None => (
                    u.iter().map(|a| a.scale(*s)).collect(),
                    j.iter().map(|r| r.iter().map(|a| a.scale(*s)).collect()).collect(),
                ),
                Some((au, aj)) => (
                    au.iter().zip(&u).map(|(a, b)| *a + b.scale(*s)).collect(),
                    aj.iter()
                        .zip(&j)
                        .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| *a + b.scale(*s)).collect())
                        .collect(),
                ),
            });
        }
        acc.expect("at least one part")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    #[serde(rename = "L")]
    pub l: f64,
    /// `√deficit₁` of the raw family at `t_n`
    pub before: f64,
    /// `√deficit₁` after the vector heat flow from `−L` and conformal Killing removal
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub n: usize,
    pub delta: f64,
    pub rows: Vec<ImprovementRow>,
    /// least-squares slope of `log after` against `log L`
    pub slope: f64,
    /// `−1/(2(n−2))`
    pub predicted_slope: f64,
}

fn sup_lie_deficit(n: usize, jets: &[JetField], seed: u64) -> f64 {
    let t = reference_time(n);
    let radius = (-2.0 * (n as f64 - 2.0) * t).sqrt();
    let metric = NeckMetric::cylinder(n).with_radius(radius);
    let lie = LieDeficit {
        metric: &metric,
        fields: jets,
        degree: 3,
        radius,
        r: radius,
    };
    let pts = sample_sphere(n, 8, seed);
    let mut worst: f64 = 0.0;
    for z in linspace(-radius, radius, 5) {
        for x in &pts {
            let mut p = x.clone();
            p.push(z);
            worst = worst.max(lie.at(&p));
        }
    }
    worst
}

/// Deficit₁ on `|z| ≤ r` at `t_n` before and after smoothing, for each `L`.
/// The flow runs on the exact cylinder, where rotations are stationary and the
/// contamination coefficient solves its scalar equation in closed form.
pub fn improvement_experiment(
    sample: &NeckSample,
    family: &RotationFamily,
    contamination: &Contamination,
    ls: &[f64],
) -> Result<ImprovementReport> {
    let n = sample.n;
    if n < 4 {
        return Err(LabError::Dimension { got: n, need: ">= 4" });
    }
    if sample.profile != NeckMetric::cylinder(n) || sample.r != sample.data_scale || sample.time_offset != 0.0 {
        return Err(LabError::Hypothesis(
            "the vector heat flow is only available on the exact shrinking cylinder".into(),
        ));
    }
    if family.n != n || contamination.psi.len() != family.len() || contamination.psi.iter().any(|p| p.len() != n) {
        return Err(LabError::Invalid("family and contamination sizes disagree".into()));
    }
    let t_end = reference_time(n);
    let coef_end = -(-t_end).powf(growing_norm_exponent(n)) / (4.0 * (n as f64 - 2.0));
    let rotations = family.fields(Space::cylinder(n), standard_scale(n));
    let rows = ls
        .par_iter()
        .map(|&l| {
            if !(-l < t_end) {
                return Err(LabError::Window { needed: -t_end, have: l });
            }
            let t0 = -l;
            let mut before: Vec<JetField> = Vec::new();
            let mut after: Vec<JetField> = Vec::new();
            for (rot, psi) in rotations.iter().zip(&contamination.psi) {
                before.push(combined(vec![
                    (1.0, poly_field(rot)),
                    (1.0, gradient_field(psi.clone(), move |z, m| contamination.coefficient(n, l, z, t0, m))),
                ]));
                let c_fit = contamination.coefficient(n, l, 0.0, t_end, 0);
                let scaled: Vec<f64> = psi.iter().map(|v| v * c_fit / coef_end).collect();
                let xi = conformal_killing_removal(n, &scaled, t_end)?.xi;
                after.push(combined(vec![
                    (1.0, poly_field(rot)),
                    (1.0, gradient_field(psi.clone(), move |z, m| contamination.coefficient(n, l, z, t_end, m))),
                    (-1.0, poly_field(&xi)),
                ]));
            }
            Ok(ImprovementRow {
                l,
                before: sup_lie_deficit(n, &before, 0).sqrt(),
                after: sup_lie_deficit(n, &after, 0).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = log_slope(&rows);
    Ok(ImprovementReport {
        n,
        delta: contamination.delta,
        rows,
        slope,
        predicted_slope: -1.0 / (2.0 * (n as f64 - 2.0)),
    })
}

fn log_slope(rows: &[ImprovementRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.after > 0.0)
        .map(|r| (r.l.ln(), r.after.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn quick() -> SymmetryWindow {
        SymmetryWindow {
            times: 2,
            heights: 3,
            angles: 4,
            orbit_points: 2,
            ..SymmetryWindow::default()
        }
    }

    /// All four coefficients perturbed, slowly enough in `z` for leaves of radius 20.
    fn slow(n: usize, delta: f64) -> NeckMetric {
        let m = NeckMetric::standard_perturbation(n, delta);
        NeckMetric {
            g0: m.g0.dilate(0.05),
            g1: m.g1.dilate(0.05),
            e0: m.e0.dilate(0.05),
            e1: m.e1.dilate(0.05),
            ..m
        }
    }

    fn random_orthogonal(k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        a.qr().q()
    }

    fn mix(family: &[VectorField], omega: &DMatrix<f64>) -> Vec<VectorField> {
        (0..family.len())
            .map(|a| {
                (0..family.len()).fold(VectorField::zero(family[0].space), |acc, b| {
                    acc.add(&family[b].scale(omega[(a, b)]))
                })
            })
            .collect()
    }

    #[test]
    fn ambient_projection_is_idempotent_on_every_slot() {
        let x = [0.6, 0.0, 0.8, 0.0, 0.3];
        let p = projector(&x, 4);
        let t: Vec<f64> = (0..125).map(|i| (i as f64 * 0.37).sin()).collect();
        let once = contract(&t, &[&p, &p, &p]);
        let twice = contract(&once, &[&p, &p, &p]);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn jets_follow_the_product_rule() {
        // f = x²y at (2, 3)
        let x = Jet2::var(0, 2.0);
        let y = Jet2::var(1, 3.0);
        let f = x * x * y;
        assert_eq!(f.v, 12.0);
        assert_eq!((f.g[0], f.g[1]), (12.0, 4.0));
        assert_eq!((f.h[0][0], f.h[0][1], f.h[1][0], f.h[1][1]), (6.0, 4.0, 4.0, 0.0));
    }

    #[test]
    fn cylinder_distance_vanishes_and_floor_qualifies() {
        let neck = neck_rescale(&NeckSample::cylinder(4)).unwrap();
        for eps in [1.0, 0.1, 0.01] {
            assert_eq!(neck.distance(eps).unwrap(), 0.0);
        }
        assert_eq!(neck.qualifying_epsilon().unwrap(), Some(0.01));
    }

    #[test]
    fn wrong_scale_is_bounded_away_from_the_cylinder() {
        let n = 4;
        let mut s = NeckSample::cylinder(n);
        s.r = 1.1;
        let d = neck_rescale(&s).unwrap().distance(1.0).unwrap();
        assert!(d >= (1.0f64 - 1.1 * 1.1).abs() * 0.5);
        assert_relative_eq!(d, 3f64.sqrt() * (1.0 - 1.0 / 1.21), max_relative = 1e-12);
    }

    #[test]
    fn short_windows_are_reported() {
        let s = NeckSample::cylinder(4).with_window(0.5, 10.0);
        let neck = neck_rescale(&s).unwrap();
        assert!(matches!(neck.qualifying_epsilon(), Err(LabError::Window { .. })));
        let neck = neck_rescale(&NeckSample::cylinder(4)).unwrap();
        assert!(matches!(neck.distance(0.005), Err(LabError::Window { needed, .. }) if needed == 200.0));
        assert!(symmetry_deficit(&s, &standard_family(4), &quick()).is_err());
    }

    #[test]
    fn qualifying_epsilon_never_worsens_with_a_larger_window() {
        let base = NeckSample::new(NeckMetric::standard_perturbation(4, 0.02));
        let mut last = f64::INFINITY;
        for w in [2.0, 5.0, 10.0, 20.0, 40.0] {
            let e = neck_rescale(&base.with_window(w, w)).unwrap().qualifying_epsilon().unwrap().unwrap();
            assert!(e <= last);
            last = e;
        }
        assert!(last > 1.0 / 40.0, "a genuine perturbation is not a 1/40-neck");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn distance_is_linear_in_the_perturbation(delta in 1e-4f64..1e-2, eps in 0.2f64..1.0) {
            let d = |s: f64| neck_rescale(&NeckSample::new(NeckMetric::standard_perturbation(4, s)))
                .unwrap()
                .distance(eps)
                .unwrap();
            let (a, b) = (d(delta), d(2.0 * delta));
            prop_assert!(a > 0.0);
            prop_assert!((b / a - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_cylinder_has_vanishing_deficits() {
        for n in [4, 5] {
            let rep = symmetry_deficit(&NeckSample::cylinder(n), &standard_family(n), &quick()).unwrap();
            assert!(rep.deficits.iter().all(|d| *d <= 1e-10), "{n}: {:?}", rep.deficits);
            assert_eq!(rep.leaves, 6);
        }
    }

    #[test]
    fn scaled_family_only_moves_the_gram_deficit() {
        let n = 4;
        let delta = 0.01;
        let fam: Vec<VectorField> = standard_family(n).iter().map(|f| f.scale(1.0 + delta)).collect();
        let rep = symmetry_deficit(&NeckSample::cylinder(n), &fam, &quick()).unwrap();
        assert!(rep.deficits[0] <= 1e-10 && rep.deficits[1] <= 1e-10);
        let expected = 6.0 * ((1.0 + delta) * (1.0 + delta) - 1.0).powi(2);
        assert_relative_eq!(rep.deficits[2], expected, max_relative = 1e-10);
    }

    #[test]
    fn bump_deficits_are_quadratic_in_the_bump() {
        let n = 4;
        let run = |d: f64| {
            let m = NeckMetric::sphere_bump(n, ZProfile::wave(d, 0.05, 0.3));
            symmetry_deficit(&NeckSample::new(m), &standard_family(n), &quick()).unwrap().deficits
        };
        let (a, b) = (run(1e-3), run(2e-3));
        for k in 0..2 {
            assert!(a[k] > 0.0);
            assert!((b[k] / a[k] - 4.0).abs() < 0.05, "{k}: {a:?} {b:?}");
        }
    }

    #[test]
    fn deficits_are_gauge_invariant() {
        let n = 4;
        let sample = NeckSample::new(slow(n, 0.005));
        let fam = standard_family(n);
        let base = symmetry_deficit(&sample, &fam, &quick()).unwrap();
        for seed in [1, 2] {
            let omega = random_orthogonal(fam.len(), seed);
            let rep = symmetry_deficit(&sample, &mix(&fam, &omega), &quick()).unwrap();
            for k in 0..3 {
                assert_relative_eq!(rep.deficits[k], base.deficits[k], max_relative = 1e-10);
            }
        }
        let mut perm = fam.clone();
        perm.reverse();
        let rep = symmetry_deficit(&sample, &perm, &quick()).unwrap();
        for k in 0..3 {
            assert_relative_eq!(rep.deficits[k], base.deficits[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn fields_tangent_to_the_leaves_have_no_normal_deficit() {
        let n = 4;
        let tangent: Vec<VectorField> = rotation_family_fixing_axis(n);
        let rep = symmetry_deficit(&NeckSample::new(slow(n, 0.01)), &tangent, &quick()).unwrap();
        assert!(rep.deficits[1] < 1e-30, "{:?}", rep.deficits);
        assert!(rep.deficits[0] > 0.0);
    }

    fn rotation_family_fixing_axis(n: usize) -> Vec<VectorField> {
        standard_family(n)
            .into_iter()
            .zip(crate::sphere::rotation_pairs(n))
            .filter(|(_, (i, _))| *i > 0)
            .map(|(f, _)| f)
            .collect()
    }

    #[test]
    fn rescaling_metric_and_scale_together_changes_nothing() {
        let n = 4;
        let sample = NeckSample::new(slow(n, 0.005));
        let fam = standard_family(n);
        let a = symmetry_deficit(&sample, &fam, &quick()).unwrap();
        let b = symmetry_deficit(&sample.scaled(2.0), &fam, &quick()).unwrap();
        for k in 0..3 {
            assert_relative_eq!(a.deficits[k], b.deficits[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn fast_perturbations_have_no_foliation_on_wide_windows() {
        let m = NeckMetric::sphere_bump(4, ZProfile::wave(0.02, 1.0, 0.0));
        let err = symmetry_deficit(&NeckSample::new(m), &standard_family(4), &quick()).unwrap_err();
        assert!(matches!(err, LabError::Foliation(_)), "{err}");
    }

    #[test]
    fn lipschitz_estimate_vanishes_on_the_cylinder() {
        let w = SymmetryWindow {
            times: 1,
            heights: 1,
            ..quick()
        };
        let lip = deficit_lipschitz(&NeckSample::cylinder(4), &standard_family(4), &w, 0.1).unwrap();
        assert!(lip.iter().all(|v| *v < 1e-8), "{lip:?}");
        let lip = deficit_lipschitz(&NeckSample::new(slow(4, 0.01)), &standard_family(4), &w, 0.1).unwrap();
        assert!(lip.iter().all(|v| v.is_finite()) && lip[0] > 0.0);
    }

    #[test]
    fn report_serializes_with_upper_case_window_length() {
        let rep = SymmetryReport::new([0.0, 1e-4, 0.0], quick(), 1);
        let v = serde_json::to_value(&rep).unwrap();
        assert!(v.get("L").is_some());
        assert_relative_eq!(v["epsilon"].as_f64().unwrap(), 1e-2, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_family_is_left_alone() {
        let n = 4;
        let c = Contamination::random(n, 6, 0.0, 1);
        let rep = improvement_experiment(&NeckSample::cylinder(n), &RotationFamily::canonical(n), &c, &[20.0]).unwrap();
        assert!(rep.rows[0].before < 1e-8 && rep.rows[0].after < 1e-8, "{rep:?}");
    }

    #[test]
    fn smoothing_beats_the_predicted_rate() {
        let n = 4;
        let c = Contamination::random(n, 6, 1e-3, 3);
        let rep = improvement_experiment(&NeckSample::cylinder(n), &RotationFamily::canonical(n), &c, &[20.0, 40.0, 80.0])
            .unwrap();
        for row in &rep.rows {
            assert!(row.after < 0.1 * row.before, "{row:?}");
        }
        assert!(rep.slope <= rep.predicted_slope + 0.02, "{rep:?}");
        assert!(rep.slope > rep.predicted_slope - 0.2, "{rep:?}");
    }

    #[test]
    fn improvement_rows_are_gauge_invariant() {
        let n = 4;
        let c = Contamination::random(n, 6, 1e-3, 5);
        let omega = random_orthogonal(6, 9);
        let fam = RotationFamily::conjugated(n, &omega).unwrap();
        let sample = NeckSample::cylinder(n);
        let a = improvement_experiment(&sample, &RotationFamily::canonical(n), &c, &[20.0]).unwrap();
        let b = improvement_experiment(&sample, &fam, &c.mixed(&omega), &[20.0]).unwrap();
        assert_relative_eq!(a.rows[0].before, b.rows[0].before, max_relative = 1e-10);
        assert_relative_eq!(a.rows[0].after, b.rows[0].after, max_relative = 1e-10);
    }

    #[test]
    fn improvement_needs_the_exact_cylinder() {
        let n = 4;
        let c = Contamination::random(n, 6, 1e-3, 1);
        let s = NeckSample::new(slow(n, 0.01));
        let err = improvement_experiment(&s, &RotationFamily::canonical(n), &c, &[20.0]).unwrap_err();
        assert!(matches!(err, LabError::Hypothesis(_)));
    }
}

//! Isotropic-curvature forms on orthonormal four-frames and their minimization.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::operator::{wedge, CurvatureOperator};
use crate::error::{LabError, Result};

pub const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourFrame {
    pub e: [Vec<f64>; 4],
    pub lambda: f64,
    pub mu: f64,
}

impl FourFrame {
    pub fn new(e: [Vec<f64>; 4], lambda: f64, mu: f64) -> Result<Self> {
        let f = Self { e, lambda, mu };
        f.validate()?;
        Ok(f)
    }

    /// The first four standard basis vectors of `R^n`.
    pub fn standard(n: usize, lambda: f64, mu: f64) -> Result<Self> {
        let e = std::array::from_fn(|a| {
            let mut v = vec![0.0; n];
            v[a] = 1.0;
            v
        });
        Self::new(e, lambda, mu)
    }

    pub fn n(&self) -> usize {
        self.e[0].len()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = self.e[a].iter().zip(&self.e[b]).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.e[0].len();
        if n < 4 || self.e.iter().any(|v| v.len() != n) {
            return Err(LabError::Invalid("frame vectors must share a dimension >= 4".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.mu) {
            return Err(LabError::Invalid("lambda and mu must lie in [0, 1]".into()));
        }
        let defect = self.orthonormality_defect();
        if defect > FRAME_TOL {
            return Err(LabError::NonOrthonormalFrame { defect });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsoMode {
    Pic,
    Pic1,
    Pic2,
}

/// The five curvature components entering the isotropic form.
#[derive(Debug, Clone, Copy)]
struct Terms {
    r1313: f64,
    r1414: f64,
    r2323: f64,
    r2424: f64,
    r1234: f64,
}

impl Terms {
    fn value(&self, l: f64, m: f64) -> f64 {
        self.r1313 + l * l * self.r1414 + m * m * self.r2323 + l * l * m * m * self.r2424
            - 2.0 * l * m * self.r1234
    }
}

fn terms(r: &CurvatureOperator, e: &[Vec<f64>; 4]) -> Terms {
    let sec = |a: usize, b: usize| r.eval(&e[a], &e[b], &e[a], &e[b]);
    Terms {
        r1313: sec(0, 2),
        r1414: sec(0, 3),
        r2323: sec(1, 2),
        r2424: sec(1, 3),
        r1234: r.eval(&e[0], &e[1], &e[2], &e[3]),
    }
}

/// Form value on a validated frame.
pub fn isotropic_value(r: &CurvatureOperator, f: &FourFrame) -> Result<f64> {
    f.validate()?;
    if f.n() != r.n() {
        return Err(LabError::Invalid("frame and operator dimensions differ".into()));
    }
    Ok(terms(r, &f.e).value(f.lambda, f.mu))
}

/// Exact minimum of `a + b x^2 - 2 e x` style quadratics on `[0, 1]`.
fn min_quadratic_unit(c0: f64, c2: f64, c1: f64) -> (f64, f64) {
    // q(x) = c0 + c2 x^2 + c1 x
    let q = |x: f64| c0 + c2 * x * x + c1 * x;
    let mut best = (q(0.0), 0.0);
    let v1 = q(1.0);
    if v1 < best.0 {
        best = (v1, 1.0);
    }
    if c2 > 0.0 {
        let x = -c1 / (2.0 * c2);
        if x > 0.0 && x < 1.0 && q(x) < best.0 {
            best = (q(x), x);
        }
    }
    best
}

/// Minimizes the form over the admissible `(lambda, mu)` for fixed terms.
fn inner_min(mode: IsoMode, t: &Terms) -> (f64, f64, f64) {
    match mode {
        IsoMode::Pic => (t.value(1.0, 1.0), 1.0, 1.0),
        IsoMode::Pic1 => {
            let (v, l) = min_quadratic_unit(t.r1313 + t.r2323, t.r1414 + t.r2424, -2.0 * t.r1234);
            (v, l, 1.0)
        }
        IsoMode::Pic2 => pic2_inner_min(t),
    }
}

fn pic2_inner_min(t: &Terms) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut consider = |l: f64, m: f64| {
        if (0.0..=1.0).contains(&l) && (0.0..=1.0).contains(&m) {
            let v = t.value(l, m);
            if v < best.0 {
                best = (v, l, m);
            }
        }
    };
    // fixing mu, the form is quadratic in lambda (and vice versa)
    let lam_opt = |m: f64| {
        min_quadratic_unit(t.r1313 + m * m * t.r2323, t.r1414 + m * m * t.r2424, -2.0 * m * t.r1234).1
    };
    let mu_opt = |l: f64| {
        min_quadratic_unit(t.r1313 + l * l * t.r1414, t.r2323 + l * l * t.r2424, -2.0 * l * t.r1234).1
    };
    for &m in &[0.0, 1.0] {
        consider(lam_opt(m), m);
    }
    for &l in &[0.0, 1.0] {
        consider(l, mu_opt(l));
    }
    // interior critical points: with p = lambda*mu one finds
    // b lambda^2 = c mu^2 = p (e - p d) and (e - p d)^2 = b c
    let (b, c, d, e) = (t.r1414, t.r2323, t.r2424, t.r1234);
    if b > 0.0 && c > 0.0 {
        let root = (b * c).sqrt();
        let mut ps = Vec::new();
        if d.abs() > 1e-300 {
            ps.push((e - root) / d);
            ps.push((e + root) / d);
        }
        for p in ps {
            let s = p * (e - p * d);
            if p > 0.0 && s >= 0.0 {
                consider((s / b).sqrt(), (s / c).sqrt());
            }
        }
    }
    // guard against degenerate coefficient patterns: profile over mu
    let profile = |m: f64| t.value(lam_opt(m), m);
    let grid = 48;
    let mut bm = 0.0;
    let mut bv = f64::INFINITY;
    for k in 0..=grid {
        let m = k as f64 / grid as f64;
        let v = profile(m);
        if v < bv {
            bv = v;
            bm = m;
        }
    }
    let (mut lo, mut hi) = ((bm - 1.0 / grid as f64).max(0.0), (bm + 1.0 / grid as f64).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if profile(m1) <= profile(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let m = 0.5 * (lo + hi);
    consider(lam_opt(m), m);
    best
}

/// Outcome of a frame minimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsoMin {
    pub value: f64,
    pub frame: FourFrame,
    pub converged: bool,
    pub refined: usize,
}

/// Fast evaluator using the bivector matrix of the operator.
pub struct FormEvaluator {
    m: DMatrix<f64>,
}

impl FormEvaluator {
    pub fn new(r: &CurvatureOperator) -> Self {
        Self { m: r.bivector_matrix() }
    }

    fn q(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.m * y))
    }

    /// Minimum over `(lambda, mu)` of the form on an (assumed orthonormal) frame.
    pub fn frame_min(&self, mode: IsoMode, e: &[Vec<f64>; 4]) -> (f64, f64, f64) {
        let w13 = wedge(&e[0], &e[2]);
        let w14 = wedge(&e[0], &e[3]);
        let w23 = wedge(&e[1], &e[2]);
        let w24 = wedge(&e[1], &e[3]);
        let w12 = wedge(&e[0], &e[1]);
        let w34 = wedge(&e[2], &e[3]);
        let t = Terms {
            r1313: self.q(&w13, &w13),
            r1414: self.q(&w14, &w14),
            r2323: self.q(&w23, &w23),
            r2424: self.q(&w24, &w24),
            r1234: self.q(&w12, &w34),
        };
        inner_min(mode, &t)
    }
}

/// Uniformly distributed orthonormal four-frame in `R^n`.
pub fn random_frame(n: usize, rng: &mut impl rand::Rng) -> [Vec<f64>; 4] {
    loop {
        let raw: DMatrix<f64> = DMatrix::from_fn(n, 4, |_, _| StandardNormal.sample(rng));
        if let Some(q) = gram_schmidt(&raw) {
            return std::array::from_fn(|a| q.column(a).iter().copied().collect());
        }
    }
}

/// Modified Gram–Schmidt on the columns; `None` if rank deficient.
pub fn gram_schmidt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = m.clone();
    for a in 0..q.ncols() {
        for _pass in 0..2 {
            for b in 0..a {
                let proj = q.column(a).dot(&q.column(b));
                let qb = q.column(b).clone_owned();
                let mut ca = q.column_mut(a);
                ca.axpy(-proj, &qb, 1.0);
            }
        }
        let norm = q.column(a).norm();
        if norm < 1e-12 {
            return None;
        }
        q.column_mut(a).scale_mut(1.0 / norm);
    }
    Some(q)
}

fn euclidean_gradient(r: &CurvatureOperator, e: &DMatrix<f64>, l: f64, m: f64) -> DMatrix<f64> {
    let n = e.nrows();
    let cols: Vec<Vec<f64>> = (0..4).map(|a| e.column(a).iter().copied().collect()).collect();
    // weighted terms (coef, [slots]) with R(e_s0, e_s1, e_s2, e_s3)
    let terms: [(f64, [usize; 4]); 5] = [
        (1.0, [0, 2, 0, 2]),
        (l * l, [0, 3, 0, 3]),
        (m * m, [1, 2, 1, 2]),
        (l * l * m * m, [1, 3, 1, 3]),
        (-2.0 * l * m, [0, 1, 2, 3]),
    ];
    let mut g = DMatrix::zeros(n, 4);
    for (coef, slots) in terms.iter() {
        if *coef == 0.0 {
            continue;
        }
        for p in 0..4 {
            // move slot p to the front using the curvature symmetries
            let v = match p {
                0 => r.contract_first(&cols[slots[1]], &cols[slots[2]], &cols[slots[3]]),
                // R(a, X, c, d) = -R(X, a, c, d)
                1 => r
                    .contract_first(&cols[slots[0]], &cols[slots[2]], &cols[slots[3]])
                    .into_iter()
                    .map(|x| -x)
                    .collect(),
                // R(a, b, X, d) = R(X, d, a, b)
                2 => r.contract_first(&cols[slots[3]], &cols[slots[0]], &cols[slots[1]]),
                // R(a, b, c, X) = -R(X, c, a, b)
                _ => r
                    .contract_first(&cols[slots[2]], &cols[slots[0]], &cols[slots[1]])
                    .into_iter()
                    .map(|x| -x)
                    .collect(),
            };
            let s = slots[p];
            for i in 0..n {
                g[(i, s)] += coef * v[i];
            }
        }
    }
    g
}

/// Projected-gradient descent on the Stiefel manifold with Gram–Schmidt retraction.
fn refine(
    r: &CurvatureOperator,
    ev: &FormEvaluator,
    mode: IsoMode,
    start: [Vec<f64>; 4],
) -> ([Vec<f64>; 4], f64, f64, f64, bool) {
    let n = r.n();
    let mut e = DMatrix::from_fn(n, 4, |i, a| start[a][i]);
    let to_arr = |e: &DMatrix<f64>| -> [Vec<f64>; 4] {
        std::array::from_fn(|a| e.column(a).iter().copied().collect())
    };
    let (mut val, mut l, mut m) = ev.frame_min(mode, &to_arr(&e));
    let mut step = 0.1;
    let mut converged = false;
    for _ in 0..400 {
        let g = euclidean_gradient(r, &e, l, m);
        let etg = e.transpose() * &g;
        let sym = 0.5 * (&etg + etg.transpose());
        let rg = &g - &e * sym;
        let gnorm = rg.norm();
        if gnorm < 1e-11 * (1.0 + val.abs()) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &e - step * &rg;
            if let Some(q) = gram_schmidt(&trial) {
                let (tv, tl, tm) = ev.frame_min(mode, &to_arr(&q));
                if tv <= val - 1e-4 * step * gnorm * gnorm {
                    e = q;
                    let improvement = val - tv;
                    val = tv;
                    l = tl;
                    m = tm;
                    step *= 2.0;
                    accepted = true;
                    if improvement < 1e-15 * (1.0 + val.abs()) {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    (to_arr(&e), val, l, m, converged)
}

/// Minimum of the isotropic form over orthonormal frames.
///
/// Frames are drawn from a seeded generator. Each sample that improves on the
/// best raw value seen so far is refined by projected gradient, so enlarging
/// the budget never increases the returned value.
pub fn min_isotropic(r: &CurvatureOperator, mode: IsoMode, budget: usize, seed: u64) -> Result<IsoMin> {
    if budget == 0 {
        return Err(LabError::Invalid("budget must be at least 1".into()));
    }
    let n = r.n();
    let ev = FormEvaluator::new(r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_raw = f64::INFINITY;
    let mut best: Option<IsoMin> = None;
    let mut refined = 0;
    for _ in 0..budget {
        let f = random_frame(n, &mut rng);
        let (raw, _, _) = ev.frame_min(mode, &f);
        if raw >= best_raw {
            continue;
        }
        best_raw = raw;
        let (e, val, l, m, conv) = refine(r, &ev, mode, f);
        refined += 1;
        if best.as_ref().is_none_or(|b| val < b.value) {
            best = Some(IsoMin {
                value: val,
                frame: FourFrame { e, lambda: l, mu: m },
                converged: conv,
                refined,
            });
        }
    }
    let mut out = best.expect("budget >= 1 yields at least one refined frame");
    out.refined = refined;
    Ok(out)
}

/// Plain sampling minimum without refinement (reference for tests and reports).
pub fn brute_force_min(r: &CurvatureOperator, mode: IsoMode, samples: usize, seed: u64) -> f64 {
    let ev = FormEvaluator::new(r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| ev.frame_min(mode, &random_frame(r.n(), &mut rng)).0)
        .fold(f64::INFINITY, f64::min)
}

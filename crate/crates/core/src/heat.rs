//! The one-dimensional Dirichlet heat problem on `[−L, L]`: the image-charge
//! kernel, the Green representation in terms of initial and boundary data,
//! the boundary-kernel decay bound and a Crank–Nicolson solver.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::{gauss_kronrod, simpson_weights};

/// Target for the a-priori image tail when the order is chosen adaptively.
pub const TAIL_TARGET: f64 = 1e-14;

/// Constant in `|∂_w S(z, τ; ±L)| <= C L τ^{-3/2} exp(−L²/(100τ))`, calibrated
/// on `L ∈ {10, 10², 10³, 10⁴}`, `|z| <= 0.4 L`, `τ ∈ [10⁻², 2L]` (largest
/// observed ratio 0.1075) and frozen with headroom. Near `z = ±L` no constant works.
pub const BOUNDARY_KERNEL_C: f64 = 0.25;

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(LabError::Invalid(format!("kernel time must be positive, got {t}")))
    }
}

/// Sum over `|k| > K` of all image terms, using `|shift| >= 4(|k|−1)L` for both lattices.
pub fn image_tail_bound(l: f64, t: f64, order: usize) -> f64 {
    let norm = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
    let mut sum = 0.0;
    let mut k = order + 1;
    loop {
        let d = 4.0 * (k as f64 - 1.0) * l;
        let term = (-d * d / (4.0 * t)).exp() * (1.0 + d / (2.0 * t));
        sum += term;
        // terms decay at least geometrically once past the Gaussian peak
        if term <= 1e-30 * sum.max(1e-300) || term == 0.0 || k > order + 100_000 {
            break;
        }
        k += 1;
    }
    4.0 * norm * sum
}

/// Dirichlet heat kernel on `[−L, L]` truncated to `|k| <= order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletKernel {
    pub l: f64,
    pub order: usize,
}

impl DirichletKernel {
    pub fn new(l: f64, order: usize) -> Result<Self> {
        if !(l > 0.0) {
            return Err(LabError::Invalid("L must be positive".into()));
        }
        Ok(Self { l, order })
    }

    /// Smallest order whose tail bound at time `t` is below [`TAIL_TARGET`].
    pub fn adaptive(l: f64, t: f64) -> Result<Self> {
        check_time(t)?;
        let mut k = 1;
        while image_tail_bound(l, t, k) > TAIL_TARGET {
            k += 1;
        }
        Self::new(l, k)
    }

    pub fn tail_bound(&self, t: f64) -> f64 {
        image_tail_bound(self.l, t, self.order)
    }

    /// `S(z, t; w)`
    pub fn eval(&self, z: f64, t: f64, w: f64) -> f64 {
        let l = self.l;
        let k = self.order as i64;
        let mut s = 0.0;
        for j in -k..=k {
            let shift = 4.0 * j as f64 * l;
            let a = z - w + shift;
            let b = z + w + shift - 2.0 * l;
            s += (-a * a / (4.0 * t)).exp() - (-b * b / (4.0 * t)).exp();
        }
        s / (4.0 * std::f64::consts::PI * t).sqrt()
    }

    /// `∂S/∂w (z, t; w)`
    pub fn dw(&self, z: f64, t: f64, w: f64) -> f64 {
        let l = self.l;
        let k = self.order as i64;
        let mut s = 0.0;
        for j in -k..=k {
            let shift = 4.0 * j as f64 * l;
            let a = z - w + shift;
            let b = z + w + shift - 2.0 * l;
            s += a / (2.0 * t) * (-a * a / (4.0 * t)).exp() + b / (2.0 * t) * (-b * b / (4.0 * t)).exp();
        }
        s / (4.0 * std::f64::consts::PI * t).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub order: usize,
    pub tail_bound: f64,
}

/// Evaluates `S(z, t; w)`; `order = None` selects the adaptive truncation.
pub fn kernel_eval(z: f64, t: f64, w: f64, l: f64, order: Option<usize>) -> Result<KernelValue> {
    check_time(t)?;
    if !(l > 0.0) {
        return Err(LabError::Invalid("L must be positive".into()));
    }
    let tol = 1e-12 * l;
    if z.abs() > l + tol || w.abs() > l + tol {
        return Err(LabError::Invalid(format!("z = {z}, w = {w} outside [-{l}, {l}]")));
    }
    let kernel = match order {
        Some(k) => DirichletKernel::new(l, k)?,
        None => DirichletKernel::adaptive(l, t)?,
    };
    Ok(KernelValue {
        value: kernel.eval(z, t, w),
        order: kernel.order,
        tail_bound: kernel.tail_bound(t),
    })
}

/// Initial data at `t = −L` and Dirichlet data at `z = ±L`, as functions.
pub struct HeatProblem<'a> {
    pub l: f64,
    pub initial: &'a dyn Fn(f64) -> f64,
    pub left: &'a dyn Fn(f64) -> f64,
    pub right: &'a dyn Fn(f64) -> f64,
}

impl<'a> HeatProblem<'a> {
    pub fn new(
        l: f64,
        initial: &'a dyn Fn(f64) -> f64,
        left: &'a dyn Fn(f64) -> f64,
        right: &'a dyn Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(l > 0.0) {
            return Err(LabError::Invalid("L must be positive".into()));
        }
        Ok(Self {
            l,
            initial,
            left,
            right,
        })
    }

    pub fn t_start(&self) -> f64 {
        -self.l
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RepresentationOptions {
    /// Simpson spacing cap for the initial-data integral
    pub data_step: f64,
    /// Kronrod tolerance for each boundary integral
    pub boundary_tol: f64,
}

impl Default for RepresentationOptions {
    fn default() -> Self {
        Self {
            data_step: 0.01,
            boundary_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub value: f64,
    pub initial_part: f64,
    pub boundary_part: f64,
    /// `∫|S(z, t+L; w)| dw` over the integration window
    pub kernel_mass: f64,
    pub truncation_bound: f64,
}

/// Green representation
/// `u(z,t) = ∫ S(z,t+L;w) u(w,−L) dw + ∫_{−L}^{t} [∂_wS(z,t−s;−L) u(−L,s) − ∂_wS(z,t−s;L) u(L,s)] ds`.
pub fn representation_solve(
    p: &HeatProblem,
    z: f64,
    t: f64,
    opts: RepresentationOptions,
) -> Result<Representation> {
    let l = p.l;
    if z.abs() > l || t < -l || t > 0.0 {
        return Err(LabError::OutsideWindow { z, t });
    }
    let exact = |value: f64| Representation {
        value,
        initial_part: 0.0,
        boundary_part: 0.0,
        kernel_mass: 0.0,
        truncation_bound: 0.0,
    };
    if t == -l {
        return Ok(exact((p.initial)(z)));
    }
    if z == l {
        return Ok(exact((p.right)(t)));
    }
    if z == -l {
        return Ok(exact((p.left)(t)));
    }
    let tau = t + l;
    let kernel = DirichletKernel::adaptive(l, tau)?;

    // the kernel is negligible beyond 40√τ of z (before images reflect it back in)
    let reach = 40.0 * tau.sqrt();
    let (a, b) = ((z - reach).max(-l), (z + reach).min(l));
    let h_target = opts.data_step.min(tau.sqrt() / 20.0);
    let m = (((b - a) / h_target).ceil() as usize).max(2);
    let m = m + (m & 1);
    let h = (b - a) / m as f64;
    let weights = simpson_weights(m, h);
    let (mut initial_part, mut mass) = (0.0, 0.0);
    for (i, wt) in weights.iter().enumerate() {
        let w = a + i as f64 * h;
        let s = kernel.eval(z, tau, w);
        initial_part += wt * s * (p.initial)(w);
        mass += wt * s.abs();
    }

    let boundary_integrand = |s: f64| -> f64 {
        let dt = t - s;
        if dt <= 0.0 {
            return 0.0;
        }
        let k = DirichletKernel::adaptive(l, dt).unwrap_or(kernel);
        k.dw(z, dt, -l) * (p.left)(s) - k.dw(z, dt, l) * (p.right)(s)
    };
    let q = gauss_kronrod(boundary_integrand, -l, t, opts.boundary_tol, 1e-13, 4000);

    Ok(Representation {
        value: initial_part + q.value,
        initial_part,
        boundary_part: q.value,
        kernel_mass: mass,
        truncation_bound: kernel.tail_bound(tau),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryKernelBound {
    /// `max |∂_w S(z, t−s; ±L)|`
    pub value: f64,
    /// `C L (t−s)^{-3/2} exp(−L²/(100(t−s)))`
    pub bound: f64,
}

impl BoundaryKernelBound {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

/// `|∂_w S(z, t−s; ±L)|` against its Gaussian decay bound with the frozen constant.
pub fn boundary_kernel_bound(z: f64, t: f64, s: f64, l: f64) -> Result<BoundaryKernelBound> {
    boundary_kernel_bound_with(z, t, s, l, BOUNDARY_KERNEL_C)
}

pub fn boundary_kernel_bound_with(z: f64, t: f64, s: f64, l: f64, c: f64) -> Result<BoundaryKernelBound> {
    if !(s < t) {
        return Err(LabError::Invalid(format!("need s < t, got s = {s}, t = {t}")));
    }
    if !(l > 0.0) || z.abs() > l {
        return Err(LabError::OutsideWindow { z, t });
    }
    let tau = t - s;
    let k = DirichletKernel::adaptive(l, tau)?;
    let value = k.dw(z, tau, l).abs().max(k.dw(z, tau, -l).abs());
    Ok(BoundaryKernelBound {
        value,
        bound: c * l * tau.powf(-1.5) * (-l * l / (100.0 * tau)).exp(),
    })
}

/// Largest `|∂_w S| / (L τ^{-3/2} e^{−L²/(100τ)})` over the given samples,
/// skipping points where both sides underflow.
pub fn calibrate_boundary_constant(samples: &[(f64, f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(z, tau, l) in samples {
        let b = boundary_kernel_bound_with(z, tau, 0.0, l, 1.0)?;
        if b.bound > 0.0 && b.bound.is_finite() {
            worst = worst.max(b.value / b.bound);
        }
    }
    Ok(worst)
}

/// Solution samples on a uniform space-time grid, row `j` at time `t[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatField {
    pub z: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl HeatField {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Linear interpolation in `z` on row `j`.
    pub fn sample(&self, z: f64, j: usize) -> f64 {
        let h = self.z[1] - self.z[0];
        let x = ((z - self.z[0]) / h).clamp(0.0, (self.z.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.z.len() - 2);
        let f = x - i as f64;
        self.values[j][i] * (1.0 - f) + self.values[j][i + 1] * f
    }

    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        let mut rows = Vec::with_capacity(self.z.len() * self.t.len());
        for (j, t) in self.t.iter().enumerate() {
            for (i, z) in self.z.iter().enumerate() {
                rows.push([*t, *z, self.values[j][i]]);
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HeatGrid {
    /// number of intervals in `z` on `[−L, L]`
    pub nz: usize,
    pub t0: f64,
    pub t1: f64,
    /// number of output time intervals
    pub nt: usize,
    /// internal substeps keep `dt/dz²` at or below this ratio, which makes the
    /// scheme monotone when `<= 1`; `None` takes one step per output interval
    pub max_ratio: Option<f64>,
}

impl HeatGrid {
    pub fn new(nz: usize, t0: f64, t1: f64, nt: usize) -> Self {
        Self {
            nz,
            t0,
            t1,
            nt,
            max_ratio: Some(1.0),
        }
    }
}

/// Solves `u_t = u_zz` on `[−L, L]` by Crank–Nicolson with Thomas solves.
pub fn fd_solve(p: &HeatProblem, grid: HeatGrid) -> Result<HeatField> {
    if grid.nz < 2 || grid.nt < 1 || !(grid.t1 > grid.t0) {
        return Err(LabError::Invalid("heat grid needs nz >= 2, nt >= 1 and t1 > t0".into()));
    }
    let l = p.l;
    let nz = grid.nz;
    let dz = 2.0 * l / nz as f64;
    let z: Vec<f64> = (0..=nz).map(|i| -l + i as f64 * dz).collect();
    let dt_out = (grid.t1 - grid.t0) / grid.nt as f64;
    let sub = match grid.max_ratio {
        Some(r) if r > 0.0 => ((dt_out / (dz * dz)) / r).ceil().max(1.0) as usize,
        _ => 1,
    };
    let dt = dt_out / sub as f64;
    let r = dt / (dz * dz);

    let mut u: Vec<f64> = z.iter().map(|&x| (p.initial)(x)).collect();
    u[0] = (p.left)(grid.t0);
    u[nz] = (p.right)(grid.t0);
    let mut t_out = vec![grid.t0];
    let mut values = vec![u.clone()];

    // interior system (1 + r) u_i − r/2 (u_{i−1} + u_{i+1}) = rhs_i
    let m = nz - 1;
    let mut c_prime = vec![0.0; m];
    let mut d = vec![0.0; m];
    let (diag, off) = (1.0 + r, -0.5 * r);
    let mut t = grid.t0;
    for j in 1..=grid.nt {
        for k in 0..sub {
            let t_new = if k + 1 == sub {
                grid.t0 + j as f64 * dt_out
            } else {
                t + dt
            };
            let (lo, hi) = ((p.left)(t_new), (p.right)(t_new));
            if m > 0 {
                for i in 0..m {
                    let ui = i + 1;
                    d[i] = (1.0 - r) * u[ui] + 0.5 * r * (u[ui - 1] + u[ui + 1]);
                }
                d[0] -= off * lo;
                d[m - 1] -= off * hi;
                // Thomas forward sweep
                c_prime[0] = off / diag;
                d[0] /= diag;
                for i in 1..m {
                    let den = diag - off * c_prime[i - 1];
                    c_prime[i] = off / den;
                    d[i] = (d[i] - off * d[i - 1]) / den;
                }
                for i in (0..m - 1).rev() {
                    d[i] -= c_prime[i] * d[i + 1];
                }
                u[1..=m].copy_from_slice(&d);
            }
            u[0] = lo;
            u[nz] = hi;
            t = t_new;
        }
        t_out.push(t);
        values.push(u.clone());
    }
    Ok(HeatField { z, t: t_out, values })
}

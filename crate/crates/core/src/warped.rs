//! Rotationally symmetric metrics `dz² + φ(z)² g_{S^{n-1}}`: the shrinking
//! cylinder, an explicit finite-difference Ricci flow, and the Bryant steady
//! soliton obtained by shooting from the tip.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::{rotationally_symmetric_operator, CurvatureOperator};
use crate::error::{LabError, Result};

/// `t_n = −1/(2(n−2))`, the time at which the cylinder has unit radius.
pub fn reference_time(n: usize) -> f64 {
    -1.0 / (2.0 * (n as f64 - 2.0))
}

/// `(−2(n−2)t)^{1/2}`
pub fn cylinder_radius(n: usize, t: f64) -> Result<f64> {
    if t >= 0.0 {
        return Err(LabError::NonNegativeTime { t });
    }
    Ok((-2.0 * (n as f64 - 2.0) * t).sqrt())
}

/// `(n−1)/(−2t)`
pub fn cylinder_scalar_curvature(n: usize, t: f64) -> Result<f64> {
    if t >= 0.0 {
        return Err(LabError::NonNegativeTime { t });
    }
    Ok((n as f64 - 1.0) / (-2.0 * t))
}

/// Scalar curvature from the two warped sectional curvatures.
pub fn warped_scalar(n: usize, k_rad: f64, k_sph: f64) -> f64 {
    let m = n as f64 - 1.0;
    2.0 * m * k_rad + m * (m - 1.0) * k_sph
}

/// Curvature operator with radial direction last.
pub fn warped_operator(n: usize, k_rad: f64, k_sph: f64) -> Result<CurvatureOperator> {
    let mut d = vec![0.5 * k_sph; n];
    d[n - 1] = k_rad - 0.5 * k_sph;
    rotationally_symmetric_operator(&DMatrix::from_diagonal(&d.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedProfile {
    pub n: usize,
    pub z0: f64,
    pub dz: f64,
    pub phi: Vec<f64>,
    pub f: Option<Vec<f64>>,
}

impl WarpedProfile {
    pub fn new(n: usize, z0: f64, dz: f64, phi: Vec<f64>) -> Result<Self> {
        if n < 4 {
            return Err(LabError::Dimension { got: n, need: ">= 4" });
        }
        if !(dz > 0.0) {
            return Err(LabError::Invalid("grid spacing must be positive".into()));
        }
        Ok(Self { n, z0, dz, phi, f: None })
    }

    pub fn from_fn(n: usize, z0: f64, z1: f64, points: usize, phi: impl Fn(f64) -> f64) -> Result<Self> {
        if points < 2 {
            return Err(LabError::Invalid("need at least two grid points".into()));
        }
        let dz = (z1 - z0) / (points - 1) as f64;
        Self::new(n, z0, dz, (0..points).map(|i| phi(z0 + i as f64 * dz)).collect())
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z0 + i as f64 * self.dz
    }
}

/// Sectional curvatures on the interior grid points (indices `1..len-1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedCurvatures {
    pub z: Vec<f64>,
    pub k_rad: Vec<f64>,
    pub k_sph: Vec<f64>,
}

impl WarpedCurvatures {
    pub fn scalar(&self, n: usize) -> Vec<f64> {
        self.k_rad
            .iter()
            .zip(&self.k_sph)
            .map(|(r, s)| warped_scalar(n, *r, *s))
            .collect()
    }
}

/// `K_rad = −φ''/φ`, `K_sph = (1 − φ'²)/φ²` by central differences.
pub fn warped_curvatures(p: &WarpedProfile) -> Result<WarpedCurvatures> {
    if p.len() < 5 {
        return Err(LabError::Invalid("need at least five grid points".into()));
    }
    if let Some(i) = p.phi.iter().position(|&x| !(x > 0.0)) {
        return Err(LabError::Invalid(format!("nonpositive warp factor at index {i}")));
    }
    let h = p.dz;
    let mut out = WarpedCurvatures {
        z: Vec::new(),
        k_rad: Vec::new(),
        k_sph: Vec::new(),
    };
    for i in 1..p.len() - 1 {
        let (pm, pc, pp) = (p.phi[i - 1], p.phi[i], p.phi[i + 1]);
        let d1 = (pp - pm) / (2.0 * h);
        let d2 = ((pp + pm) - 2.0 * pc) / (h * h);
        out.z.push(p.z(i));
        out.k_rad.push(-d2 / pc);
        out.k_sph.push((1.0 - d1 * d1) / (pc * pc));
    }
    Ok(out)
}

/// Right-hand side `φ_zz − (n−2)(1 − φ_z²)/φ` on interior points; zero at the ends.
pub fn flow_rhs(n: usize, phi: &[f64], h: f64) -> Vec<f64> {
    let m = phi.len();
    let mut r = vec![0.0; m];
    for i in 1..m - 1 {
        let d1 = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
        let d2 = ((phi[i + 1] + phi[i - 1]) - 2.0 * phi[i]) / (h * h);
        r[i] = d2 - (n as f64 - 2.0) * (1.0 - d1 * d1) / phi[i];
    }
    r
}

/// One explicit second-order (Heun) step of the rotationally symmetric flow
/// with the end values frozen (an artificial truncation of the neck).
pub fn ricci_flow_step(p: &WarpedProfile, dt: f64) -> Result<WarpedProfile> {
    if p.len() < 3 {
        return Err(LabError::Invalid("need at least three grid points".into()));
    }
    if dt > 0.25 * p.dz * p.dz * (1.0 + 1e-12) {
        return Err(LabError::Invalid(format!(
            "dt = {dt} exceeds the stability bound dz²/4 = {}",
            0.25 * p.dz * p.dz
        )));
    }
    let k1 = flow_rhs(p.n, &p.phi, p.dz);
    let mid: Vec<f64> = p.phi.iter().zip(&k1).map(|(x, k)| x + dt * k).collect();
    check_positive(p, &mid)?;
    let k2 = flow_rhs(p.n, &mid, p.dz);
    let next: Vec<f64> = p
        .phi
        .iter()
        .zip(k1.iter().zip(&k2))
        .map(|(x, (a, b))| x + 0.5 * dt * (a + b))
        .collect();
    check_positive(p, &next)?;
    Ok(WarpedProfile {
        n: p.n,
        z0: p.z0,
        dz: p.dz,
        phi: next,
        f: p.f.clone(),
    })
}

fn check_positive(p: &WarpedProfile, phi: &[f64]) -> Result<()> {
    let (i, &min_phi) = phi
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if !(min_phi > 0.0) {
        return Err(LabError::Neckpinch { min_phi, z: p.z(i) });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bryant soliton

/// Exact ODE state along the soliton.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SolitonState {
    phi: f64,
    dphi: f64,
    df: f64,
    f: f64,
}

/// Steady soliton system with `Ric = D²f`:
/// `φ'' = (n−2)(1−φ'²)/φ − f'φ'`, `f'' = −(n−1)φ''/φ`.
fn soliton_rhs(n: f64, s: &SolitonState) -> SolitonState {
    let ddphi = (n - 2.0) * (1.0 - s.dphi * s.dphi) / s.phi - s.df * s.dphi;
    SolitonState {
        phi: s.dphi,
        dphi: ddphi,
        df: -(n - 1.0) * ddphi / s.phi,
        f: s.df,
    }
}

fn axpy(a: &SolitonState, h: f64, k: &SolitonState) -> SolitonState {
    SolitonState {
        phi: a.phi + h * k.phi,
        dphi: a.dphi + h * k.dphi,
        df: a.df + h * k.df,
        f: a.f + h * k.f,
    }
}

fn rk4(n: f64, s: &SolitonState, h: f64) -> SolitonState {
    let k1 = soliton_rhs(n, s);
    let k2 = soliton_rhs(n, &axpy(s, 0.5 * h, &k1));
    let k3 = soliton_rhs(n, &axpy(s, 0.5 * h, &k2));
    let k4 = soliton_rhs(n, &axpy(s, h, &k3));
    SolitonState {
        phi: s.phi + h / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
        dphi: s.dphi + h / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi),
        df: s.df + h / 6.0 * (k1.df + 2.0 * k2.df + 2.0 * k3.df + k4.df),
        f: s.f + h / 6.0 * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f),
    }
}

/// Scalar curvature and the two sectional curvatures at an ODE state.
fn soliton_curvatures(n: f64, s: &SolitonState) -> (f64, f64, f64) {
    let d = soliton_rhs(n, s);
    let k_rad = -d.dphi / s.phi;
    let k_sph = (1.0 - s.dphi * s.dphi) / (s.phi * s.phi);
    let m = n - 1.0;
    (2.0 * m * k_rad + m * (m - 1.0) * k_sph, k_rad, k_sph)
}

/// Fifth-order tip series for `f''(0) = b`:
/// `φ = z − c3 z³ + c5 z⁵`, `f' = b z + e3 z³`.
fn tip_state(n: f64, b: f64, z: f64) -> SolitonState {
    let c3 = b / (6.0 * (n - 1.0));
    let c5 = 3.0 * (13.0 * n - 10.0) * c3 * c3 / (10.0 * (n + 2.0));
    let e3 = -(n - 1.0) * (20.0 * c5 - 6.0 * c3 * c3) / 3.0;
    SolitonState {
        phi: z - c3 * z.powi(3) + c5 * z.powi(5),
        dphi: 1.0 - 3.0 * c3 * z * z + 5.0 * c5 * z.powi(4),
        df: b * z + e3 * z.powi(3),
        f: 0.5 * b * z * z + 0.25 * e3 * z.powi(4),
    }
}

/// Bryant soliton sampled on `[0, z_max]`, normalized so `R + |∇f|² = 1`
/// with `R = 1` at the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BryantProfile {
    pub n: usize,
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub scalar: Vec<f64>,
    pub k_rad: Vec<f64>,
    pub k_sph: Vec<f64>,
}

impl BryantProfile {
    pub fn warped(&self) -> WarpedProfile {
        WarpedProfile {
            n: self.n,
            z0: self.z[0],
            dz: self.z[1] - self.z[0],
            phi: self.phi.clone(),
            f: Some(self.f.clone()),
        }
    }

    pub fn normalization_defect(&self) -> f64 {
        self.scalar
            .iter()
            .zip(&self.df)
            .map(|(r, d)| (r + d * d - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Max over interior points of `|Ric − D²f|` in the radial and spherical
    /// eigen-directions: second derivatives by central differences of the
    /// stored `φ` and `f`, first derivatives from the integrator.
    pub fn soliton_residual(&self) -> f64 {
        let h = self.z[1] - self.z[0];
        let n = self.n as f64;
        let mut worst: f64 = 0.0;
        for i in 1..self.z.len() - 1 {
            let pc = self.phi[i];
            let p2 = (self.phi[i + 1] - 2.0 * pc + self.phi[i - 1]) / (h * h);
            let f2 = (self.f[i + 1] - 2.0 * self.f[i] + self.f[i - 1]) / (h * h);
            let (p1, f1) = (self.dphi[i], self.df[i]);
            let ric_rad = -(n - 1.0) * p2 / pc;
            let ric_sph = -p2 / pc + (n - 2.0) * (1.0 - p1 * p1) / (pc * pc);
            worst = worst.max((ric_rad - f2).abs()).max((ric_sph - f1 * p1 / pc).abs());
        }
        worst
    }

    /// Rows `(z, phi, f, K_rad, K_sph, R)`.
    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        (0..self.z.len())
            .map(|i| [self.z[i], self.phi[i], self.f[i], self.k_rad[i], self.k_sph[i], self.scalar[i]])
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BryantOptions {
    /// output grid spacing in normalized units
    pub dz: f64,
    /// integration substeps per output interval
    pub substeps: usize,
    /// starting radius of the shooting, in unnormalized units
    pub z_start: f64,
}

impl Default for BryantOptions {
    fn default() -> Self {
        Self {
            dz: 1e-3,
            substeps: 1,
            z_start: 1e-3,
        }
    }
}

/// Shoots from the tip with `f''(0) = 1`, then rescales by the scaling
/// symmetry `(z, φ, f) → (λz, λφ, f)` to reach `R(0) = 1`.
pub fn bryant_profile(n: usize, z_max: f64) -> Result<BryantProfile> {
    bryant_profile_with(n, z_max, BryantOptions::default())
}

pub fn bryant_profile_with(n: usize, z_max: f64, opts: BryantOptions) -> Result<BryantProfile> {
    if n < 4 {
        return Err(LabError::Dimension { got: n, need: ">= 4" });
    }
    if !(z_max > 0.0) {
        return Err(LabError::Invalid("z_max must be positive".into()));
    }
    let nf = n as f64;
    // raw system with f''(0) = 1 has R(0) = n; scaling by λ = √n gives R(0) = 1
    let lam = nf.sqrt();
    let raw_dz = opts.dz / lam;
    let raw_max = z_max / lam;
    let h = raw_dz / opts.substeps as f64;
    let steps = (raw_max / raw_dz).round() as usize;

    let mut out = BryantProfile {
        n,
        z: Vec::with_capacity(steps + 1),
        phi: Vec::with_capacity(steps + 1),
        dphi: Vec::with_capacity(steps + 1),
        f: Vec::with_capacity(steps + 1),
        df: Vec::with_capacity(steps + 1),
        scalar: Vec::with_capacity(steps + 1),
        k_rad: Vec::with_capacity(steps + 1),
        k_sph: Vec::with_capacity(steps + 1),
    };
    let push = |z_raw: f64, s: &SolitonState, out: &mut BryantProfile| {
        // at the round tip Ric = f''(0) g, so every sectional curvature is 1/(n-1)
        let (r, kr, ks) = if z_raw == 0.0 {
            (nf, 1.0 / (nf - 1.0), 1.0 / (nf - 1.0))
        } else {
            soliton_curvatures(nf, s)
        };
        out.z.push(z_raw * lam);
        out.phi.push(s.phi * lam);
        out.dphi.push(s.dphi);
        out.f.push(s.f);
        out.df.push(s.df / lam);
        out.scalar.push(r / (lam * lam));
        out.k_rad.push(kr / (lam * lam));
        out.k_sph.push(ks / (lam * lam));
    };

    let tip = SolitonState {
        phi: 0.0,
        dphi: 1.0,
        df: 0.0,
        f: 0.0,
    };
    push(0.0, &tip, &mut out);

    // grid points inside the series region come from the series itself
    let z_start = opts.z_start;
    let mut z = z_start;
    let mut s = tip_state(nf, 1.0, z_start);
    for k in 1..=steps {
        let target = k as f64 * raw_dz;
        if target <= z_start {
            push(target, &tip_state(nf, 1.0, target), &mut out);
            continue;
        }
        while z < target - 1e-15 {
            // near the pole the step must resolve the 1/z terms
            let step = h.min(0.005 * z).min(target - z);
            s = rk4(nf, &s, step);
            z += step;
            if !(s.phi > 0.0) || !s.phi.is_finite() {
                let (r, _, _) = soliton_curvatures(nf, &s);
                return Err(LabError::Shooting {
                    z: z * lam,
                    reason: "warp factor left the positive range".into(),
                    residual: (r + s.df * s.df - nf).abs() / nf,
                });
            }
        }
        push(target, &s, &mut out);
    }
    Ok(out)
}

//! The four-dimensional curvature reaction ODE on `(A, B, C)`.

use nalgebra::Matrix3;

use super::blocks::FourDBlocks;

/// Cofactor matrix `X^#`. For diagonal `X = diag(x1, x2, x3)` this is
/// `diag(x2 x3, x1 x3, x1 x2)`; no inversion, so singular `X` is fine.
pub fn cofactor(x: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let r = [(i + 1) % 3, (i + 2) % 3];
        let c = [(j + 1) % 3, (j + 2) % 3];
        // cyclic index choice absorbs the (-1)^(i+j) sign
        x[(r[0], c[0])] * x[(r[1], c[1])] - x[(r[0], c[1])] * x[(r[1], c[0])]
    })
}

pub struct BlockRates {
    pub da: Matrix3<f64>,
    pub db: Matrix3<f64>,
    pub dc: Matrix3<f64>,
}

/// `dA = A² + 2A^# + BBᵀ`, `dC = C² + 2C^# + BᵀB`, `dB = AB + BC + 2B^#`.
pub fn hamilton_rhs(a: &Matrix3<f64>, b: &Matrix3<f64>, c: &Matrix3<f64>) -> BlockRates {
    BlockRates {
        da: a * a + 2.0 * cofactor(a) + b * b.transpose(),
        db: a * b + b * c + 2.0 * cofactor(b),
        dc: c * c + 2.0 * cofactor(c) + b.transpose() * b,
    }
}

/// One classical RK4 step.
pub fn hamilton_ode_step(blocks: &FourDBlocks, dt: f64) -> FourDBlocks {
    let (a0, b0, c0) = (blocks.a, blocks.b, blocks.c);
    let k1 = hamilton_rhs(&a0, &b0, &c0);
    let h = 0.5 * dt;
    let k2 = hamilton_rhs(&(a0 + h * k1.da), &(b0 + h * k1.db), &(c0 + h * k1.dc));
    let k3 = hamilton_rhs(&(a0 + h * k2.da), &(b0 + h * k2.db), &(c0 + h * k2.dc));
    let k4 = hamilton_rhs(&(a0 + dt * k3.da), &(b0 + dt * k3.db), &(c0 + dt * k3.dc));
    let w = dt / 6.0;
    FourDBlocks::new(
        a0 + w * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da),
        b0 + w * (k1.db + 2.0 * k2.db + 2.0 * k3.db + k4.db),
        c0 + w * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc),
    )
}

/// `(d/dt tr A, (tr A)² + |B|²)` at the given state.
pub fn trace_identity_sides(blocks: &FourDBlocks) -> (f64, f64) {
    let r = hamilton_rhs(&blocks.a, &blocks.b, &blocks.c);
    let tr = blocks.trace_a();
    (r.da.trace(), tr * tr + blocks.b_norm_sq())
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    /// step factor: `dt = dt_scale / (1 + |tr A|)`
    pub dt_scale: f64,
    /// blow-up threshold on `tr A`
    pub blowup: f64,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            dt_scale: 0.01,
            blowup: 1e6,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FourDBlocks>,
    pub blew_up: bool,
}

/// Integrates until `tr A` exceeds the blow-up threshold (or `t_max`).
pub fn integrate(start: &FourDBlocks, t_max: f64, opts: IntegrationOptions) -> Trajectory {
    let mut t = 0.0;
    let mut cur = start.clone();
    let mut times = vec![0.0];
    let mut states = vec![cur.clone()];
    let mut blew_up = false;
    for _ in 0..opts.max_steps {
        if t >= t_max {
            break;
        }
        if cur.trace_a().abs() > opts.blowup || !cur.norm().is_finite() {
            blew_up = true;
            break;
        }
        let dt = (opts.dt_scale / (1.0 + cur.trace_a().abs())).min(t_max - t);
        cur = hamilton_ode_step(&cur, dt);
        t += dt;
        times.push(t);
        states.push(cur.clone());
    }
    Trajectory {
        times,
        states,
        blew_up,
    }
}

/// Both sides of `d/dt ln(b3²) <= 4 b1 b2 / b3 + 2 a3 + 2 c3` at a state,
/// the left side computed from the ODE through the top singular pair of `B`.
pub fn b3_log_derivative(blocks: &FourDBlocks) -> Option<(f64, f64)> {
    let svd = blocks.b.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let (mut k, mut top) = (0, f64::NEG_INFINITY);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > top {
            top = *s;
            k = i;
        }
    }
    let [b1, b2, b3] = blocks.b_sv;
    if b3 <= 1e-300 || (b3 - b2) <= 1e-12 * b3 {
        return None;
    }
    let rates = hamilton_rhs(&blocks.a, &blocks.b, &blocks.c);
    let uk = u.column(k);
    let vk = vt.row(k).transpose();
    let db3 = uk.dot(&(rates.db * vk));
    let lhs = 2.0 * db3 / b3;
    let rhs = 4.0 * b1 * b2 / b3 + 2.0 * blocks.a_eig[2] + 2.0 * blocks.c_eig[2];
    Some((lhs, rhs))
}

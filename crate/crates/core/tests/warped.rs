use approx::assert_relative_eq;
use necklab::curvature::min_isotropic;
use necklab::curvature::IsoMode;
use necklab::warped::*;
use necklab::LabError;
use proptest::prelude::*;

#[test]
fn cylinder_formulas() {
    assert_relative_eq!(cylinder_scalar_curvature(4, reference_time(4)).unwrap(), 6.0, epsilon = 1e-12);
    assert_relative_eq!(cylinder_scalar_curvature(4, -1.0).unwrap(), 1.5, epsilon = 1e-15);
    assert_relative_eq!(cylinder_scalar_curvature(5, reference_time(5)).unwrap(), 12.0, epsilon = 1e-12);
    for n in 4..8 {
        assert_relative_eq!(cylinder_radius(n, reference_time(n)).unwrap(), 1.0, epsilon = 1e-15);
    }
    assert!(matches!(cylinder_scalar_curvature(4, 0.0), Err(LabError::NonNegativeTime { .. })));
    assert!(cylinder_radius(4, 1.0).is_err());
}

#[test]
fn curvatures_of_model_profiles() {
    let flat = WarpedProfile::from_fn(4, -1.0, 1.0, 9, |_| 1.0).unwrap();
    let k = warped_curvatures(&flat).unwrap();
    assert!(k.k_rad.iter().all(|x| *x == 0.0) && k.k_sph.iter().all(|x| *x == 1.0));

    let p = WarpedProfile::from_fn(4, -0.5, 0.5, 1001, f64::cosh).unwrap();
    let k = warped_curvatures(&p).unwrap();
    let mid = k.z.iter().position(|z| z.abs() < 1e-12).unwrap();
    assert_relative_eq!(k.k_rad[mid], -1.0, epsilon = 1e-6);
    assert_relative_eq!(k.k_sph[mid], 1.0, epsilon = 1e-6);

    for n in 4..7 {
        let t = -0.7;
        let r = cylinder_radius(n, t).unwrap();
        let slice = WarpedProfile::from_fn(n, 0.0, 1.0, 6, |_| r).unwrap();
        let scal = warped_curvatures(&slice).unwrap().scalar(n);
        assert_relative_eq!(scal[0], cylinder_scalar_curvature(n, t).unwrap(), max_relative = 1e-12);
    }

    let bad = WarpedProfile::from_fn(4, 0.0, 1.0, 9, |z| z - 0.5).unwrap();
    assert!(warped_curvatures(&bad).is_err());
    assert!(warped_curvatures(&WarpedProfile::from_fn(4, 0.0, 1.0, 4, |_| 1.0).unwrap()).is_err());
}

#[test]
fn warped_operator_matches_scalar_formula() {
    for (kr, ks) in [(0.0, 1.0), (-1.0, 0.5), (0.3, 2.0)] {
        for n in 4..7 {
            let r = warped_operator(n, kr, ks).unwrap();
            assert_relative_eq!(r.scal(), warped_scalar(n, kr, ks), epsilon = 1e-12);
            assert!(r.symmetry_defect() < 1e-10);
            assert_relative_eq!(r.sectional(0, n - 1), kr, epsilon = 1e-12);
            assert_relative_eq!(r.sectional(0, 1), ks, epsilon = 1e-12);
        }
    }
}

#[test]
fn flow_reproduces_the_shrinking_cylinder() {
    let n = 4;
    let (t0, t1) = (-1.0, -0.5);
    // ends frozen far from the sampled center point
    let p0 = WarpedProfile::from_fn(n, -10.0, 10.0, 41, |_| cylinder_radius(n, t0).unwrap()).unwrap();
    let exact = cylinder_radius(n, t1).unwrap();
    let err = |steps: usize| {
        let dt = (t1 - t0) / steps as f64;
        let mut p = p0.clone();
        for _ in 0..steps {
            p = ricci_flow_step(&p, dt).unwrap();
        }
        (p.phi[20] - exact).abs()
    };
    let (coarse, fine) = (err(100), err(200));
    assert!(coarse < 1e-4);
    // at least second order in dt
    assert!(coarse / fine > 3.8, "{coarse} {fine}");
}

#[test]
fn flow_step_guards() {
    let p = WarpedProfile::from_fn(4, -1.0, 1.0, 21, |_| 1.0).unwrap();
    assert!(ricci_flow_step(&p, p.dz * p.dz).is_err());
    let thin = WarpedProfile::from_fn(4, -1.0, 1.0, 21, |z| if z.abs() < 1e-9 { 1e-4 } else { 1.0 }).unwrap();
    assert!(matches!(ricci_flow_step(&thin, 0.25 * thin.dz * thin.dz), Err(LabError::Neckpinch { .. })));
}

#[test]
fn bryant_tip_and_normalization() {
    let b = bryant_profile(4, 100.0).unwrap();
    assert_eq!(b.z[0], 0.0);
    assert_eq!(b.phi[0], 0.0);
    assert_relative_eq!(b.scalar[0], 1.0, epsilon = 1e-12);
    assert_eq!(b.df[0], 0.0);
    // R = n(n−1)K at the isotropic tip
    assert_relative_eq!(b.k_rad[0], 1.0 / 12.0, epsilon = 1e-10);
    assert_relative_eq!(b.k_sph[0], 1.0 / 12.0, epsilon = 1e-10);
    assert!(b.normalization_defect() < 1e-8);
    assert!(b.soliton_residual() < 1e-6);
    assert!(b.scalar.iter().all(|r| *r <= 1.0 + 1e-12));
    assert!(b.k_rad.iter().chain(&b.k_sph).all(|k| *k > 0.0));

    let zr: Vec<f64> = b.z.iter().zip(&b.scalar).filter(|(z, _)| **z >= 10.0).map(|(z, r)| z * r).collect();
    let (lo, hi) = zr.iter().fold((f64::INFINITY, 0.0f64), |(a, c), x| (a.min(*x), c.max(*x)));
    assert!(hi / lo <= 3.0);

    let w = b.warped();
    let i = b.z.iter().position(|z| *z >= 5.0).unwrap();
    let r = warped_operator(4, b.k_rad[i], b.k_sph[i]).unwrap();
    assert!(min_isotropic(&r, IsoMode::Pic2, 100, 0).unwrap().value > 0.0);
    assert_eq!(w.phi.len(), b.z.len());
    assert!(bryant_profile(3, 10.0).is_err() && bryant_profile(4, 0.0).is_err());
}

#[test]
fn bryant_profile_is_nearly_stationary_up_to_reparametrization() {
    // the soliton flows by the gradient of f: ∂t φ = flow_rhs + f'φ'
    let b = bryant_profile(5, 20.0).unwrap();
    let w = b.warped();
    let rhs = flow_rhs(5, &w.phi, w.dz);
    let worst = (1000..b.z.len() - 1).map(|i| (rhs[i] + b.df[i] * b.dphi[i]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn even_data_stay_even(a in 0.05f64..0.3, k in 0.5f64..3.0) {
        let dz = 0.1;
        let phi = (0..41).map(|i| 1.0 + a * (k * dz * (i as f64 - 20.0).abs()).cos()).collect();
        let mut p = WarpedProfile::new(4, -2.0, dz, phi).unwrap();
        let dt = 0.25 * p.dz * p.dz;
        for _ in 0..50 {
            p = ricci_flow_step(&p, dt).unwrap();
        }
        let m = p.len();
        for i in 0..m {
            prop_assert_eq!(p.phi[i], p.phi[m - 1 - i]);
        }
    }
}

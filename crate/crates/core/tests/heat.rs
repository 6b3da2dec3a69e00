use necklab::heat::*;
use proptest::prelude::*;

fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

#[test]
fn constants_are_reproduced() {
    let one = |_: f64| 1.0;
    let p = HeatProblem::new(10.0, &one, &one, &one).unwrap();
    for (z, t) in [(0.0, -9.0), (3.0, -5.0), (-9.5, -0.1), (0.0, 0.0)] {
        let r = representation_solve(&p, z, t, RepresentationOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "({z}, {t}): {}", r.value);
    }
}

#[test]
fn manufactured_solution_by_representation() {
    // u = e^{−t} cos z solves u_t = u_zz
    let l = 10.0;
    let u = |z: f64, t: f64| (-t).exp() * z.cos();
    let init = move |z: f64| u(z, -l);
    let left = move |t: f64| u(-l, t);
    let right = move |t: f64| u(l, t);
    let p = HeatProblem::new(l, &init, &left, &right).unwrap();
    for (z, t) in [(0.0, -1.0), (2.5, -0.5), (-7.0, -3.0), (9.0, -8.0)] {
        let r = representation_solve(&p, z, t, RepresentationOptions::default()).unwrap();
        let exact = u(z, t);
        assert!((r.value - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "({z}, {t}): {} vs {exact}", r.value);
    }
    assert!(representation_solve(&p, 11.0, -1.0, RepresentationOptions::default()).is_err());
    assert!(representation_solve(&p, 0.0, 0.5, RepresentationOptions::default()).is_err());
}

#[test]
fn crank_nicolson_is_second_order() {
    let l = 2.0;
    let u = |z: f64, t: f64| (-t).exp() * z.cos();
    let init = move |z: f64| u(z, -l);
    let left = move |t: f64| u(-l, t);
    let right = move |t: f64| u(l, t);
    let p = HeatProblem::new(l, &init, &left, &right).unwrap();
    let err = |nz: usize| {
        let grid = HeatGrid {
            max_ratio: None,
            ..HeatGrid::new(nz, -l, -1.0, nz)
        };
        let f = fd_solve(&p, grid).unwrap();
        let t = *f.t.last().unwrap();
        f.last().iter().zip(&f.z).map(|(v, z)| (v - u(*z, t)).abs()).fold(0.0, f64::max)
    };
    let ratio = err(40) / err(80);
    assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
}

#[test]
fn boundary_derivative_bound_examples() {
    let b = boundary_kernel_bound(0.0, 1.0, 0.0, 100.0).unwrap();
    assert!(b.holds());
    assert!(b.value <= 1e-3 * b.bound);
    // short times: faster than any power of τ
    let small: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|tau| boundary_kernel_bound(0.0, *tau, 0.0, 10.0).unwrap().value)
        .collect();
    assert!(small[0] < 1e-50);
    assert!(small[1] <= small[0] && small[2] <= small[1]);
    assert!(boundary_kernel_bound(0.0, 1.0, 1.0, 10.0).is_err());
    for l in [10.0, 20.0, 50.0] {
        for tau in [0.1, 1.0, 10.0, 100.0] {
            for z in [-0.5 * l, 0.0, 0.5 * l] {
                assert!(boundary_kernel_bound(z, tau, 0.0, l).unwrap().holds());
            }
        }
    }
}

#[test]
fn kernel_is_nonnegative_inside() {
    let l = 5.0;
    for t in [0.01, 0.5, 5.0, 50.0] {
        let k = DirichletKernel::adaptive(l, t).unwrap();
        for i in 1..40 {
            for j in 1..40 {
                let (z, w) = (-l + i as f64 * 0.25, -l + j as f64 * 0.25);
                assert!(k.eval(z, t, w) >= -1e-14);
            }
        }
    }
}

#[test]
fn semigroup_property() {
    let l = 5.0;
    let (t1, t2) = (0.3, 0.7);
    let (k1, k2, k12) = (
        DirichletKernel::adaptive(l, t1).unwrap(),
        DirichletKernel::adaptive(l, t2).unwrap(),
        DirichletKernel::adaptive(l, t1 + t2).unwrap(),
    );
    for (z, y) in [(0.0, 0.0), (1.0, -2.0), (4.5, 3.0)] {
        let composed = simpson(-l, l, 4000, |w| k1.eval(z, t1, w) * k2.eval(w, t2, y));
        assert!((composed - k12.eval(z, t1 + t2, y)).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_is_symmetric_and_odd_under_reflection(z in -4.9f64..4.9, w in -4.9f64..4.9, t in 0.05f64..5.0) {
        let k = DirichletKernel::adaptive(5.0, t).unwrap();
        prop_assert!((k.eval(z, t, w) - k.eval(w, t, z)).abs() < 1e-14);
        prop_assert!((k.eval(z, t, w) - k.eval(-z, t, -w)).abs() < 1e-14);
    }
}

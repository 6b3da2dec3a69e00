use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use necklab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nl_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn operator_handles() {
    unsafe {
        let mut op: *mut NlOperator = ptr::null_mut();
        assert_eq!(nl_operator_cylinder(4, &mut op), NlStatus::Ok);
        assert!(!op.is_null());
        let (mut n, mut scal, mut pic) = (0usize, 0.0, 0.0);
        assert_eq!(nl_operator_dimension(op, &mut n), NlStatus::Ok);
        assert_eq!(nl_operator_scalar(op, &mut scal), NlStatus::Ok);
        assert_eq!(nl_operator_min_isotropic(op, NlIsoMode::Pic, 500, 0, &mut pic), NlStatus::Ok);
        assert_eq!(n, 4);
        assert!((scal - 6.0).abs() < 1e-12);
        assert!((pic - 2.0).abs() < 1e-3);
        let (mut holds, mut margin) = (false, f64::NAN);
        assert_eq!(nl_operator_uniform_pic(op, 2.0, 100, 0, &mut holds, &mut margin), NlStatus::Ok);
        assert!(margin.abs() < 1e-12);
        assert_eq!(nl_operator_uniform_pic(op, -1.0, 100, 0, &mut holds, &mut margin), NlStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));
        nl_operator_free(op);

        let mut sph: *mut NlOperator = ptr::null_mut();
        assert_eq!(nl_operator_sphere(5, &mut sph), NlStatus::Ok);
        assert_eq!(nl_operator_scalar(sph, &mut scal), NlStatus::Ok);
        assert!((scal - 20.0).abs() < 1e-12);
        nl_operator_free(sph);
        nl_operator_free(ptr::null_mut());
    }
}

#[test]
fn operator_from_components_round_trip() {
    let n = 4;
    // constant curvature 1: R_ijkl = δ_ik δ_jl − δ_il δ_jk
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut c = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    c.push(d(i, k) * d(j, l) - d(i, l) * d(j, k));
                }
            }
        }
    }
    unsafe {
        let mut op: *mut NlOperator = ptr::null_mut();
        assert_eq!(nl_operator_from_components(n, c.as_ptr(), c.len(), &mut op), NlStatus::Ok);
        let mut scal = 0.0;
        assert_eq!(nl_operator_scalar(op, &mut scal), NlStatus::Ok);
        assert!((scal - 12.0).abs() < 1e-12);
        nl_operator_free(op);
        let mut bad: *mut NlOperator = ptr::null_mut();
        assert_eq!(nl_operator_from_components(n, c.as_ptr(), 10, &mut bad), NlStatus::InvalidArgument);
        assert!(bad.is_null());
        assert_eq!(nl_operator_from_components(n, ptr::null(), 256, &mut bad), NlStatus::NullPointer);
    }
}

#[test]
fn null_pointers_and_errors() {
    unsafe {
        let mut x = 0.0;
        assert_eq!(nl_operator_scalar(ptr::null(), &mut x), NlStatus::NullPointer);
        assert!(last_error().contains("op"));
        assert_eq!(nl_operator_cylinder(4, ptr::null_mut()), NlStatus::NullPointer);
        assert_eq!(nl_cylinder_scalar_curvature(4, 0.5, &mut x), NlStatus::InvalidArgument);
        assert_eq!(nl_cylinder_scalar_curvature(4, -0.25, &mut x), NlStatus::Ok);
        assert!((x - 6.0).abs() < 1e-12);
        assert_eq!(last_error(), "");
        assert_eq!(nl_report_counts(ptr::null(), ptr::null_mut(), ptr::null_mut()), NlStatus::NullPointer);
    }
    let v = unsafe { CStr::from_ptr(nl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn pinch_norm() {
    let m = [2.0, 0.5, 0.5, 1.0];
    let rho = 0.25;
    let ric: Vec<f64> = m.iter().enumerate().map(|(i, x)| if i % 3 == 0 { x + rho } else { *x }).collect();
    let mut lam = 0.0;
    unsafe {
        assert_eq!(nl_weighted_pinch_norm(2, m.as_ptr(), ric.as_ptr(), rho, &mut lam), NlStatus::Ok);
        assert!((lam - 1.0).abs() < 1e-12);
        assert_eq!(nl_weighted_pinch_norm(2, m.as_ptr(), m.as_ptr(), 10.0, &mut lam), NlStatus::Computation);
        let skew = [0.0, 1.0, -1.0, 0.0];
        assert_eq!(nl_weighted_pinch_norm(2, skew.as_ptr(), ric.as_ptr(), rho, &mut lam), NlStatus::InvalidArgument);
    }
}

#[test]
fn suite_run_report() {
    let cfg = CString::new(r#"{"suite": "warped"}"#).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut r: *mut NlReport = ptr::null_mut();
        assert_eq!(nl_suite_run(cfg.as_ptr(), &mut r), NlStatus::Ok);
        let (mut passed, mut failed) = (0usize, 0usize);
        assert_eq!(nl_report_counts(r, &mut passed, &mut failed), NlStatus::Ok);
        assert_eq!((passed, failed), (15, 0));
        let mut json: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(nl_report_json(r, &mut json), NlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["suite"], "warped");
        nl_string_free(json);
        assert_eq!(nl_report_write(r, path.as_ptr()), NlStatus::Ok);
        assert!(dir.path().join("report.json").exists());
        nl_report_free(r);

        let bad = CString::new(r#"{"n": 3}"#).unwrap();
        let mut r2: *mut NlReport = ptr::null_mut();
        assert_eq!(nl_suite_run(bad.as_ptr(), &mut r2), NlStatus::InvalidArgument);
        assert!(r2.is_null());
    }
}

#[test]
fn header_declares_the_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/necklab.h")).unwrap();
    for f in [
        "nl_last_error",
        "nl_version",
        "nl_operator_cylinder",
        "nl_operator_sphere",
        "nl_operator_from_components",
        "nl_operator_free",
        "nl_operator_dimension",
        "nl_operator_scalar",
        "nl_operator_min_isotropic",
        "nl_operator_uniform_pic",
        "nl_cylinder_scalar_curvature",
        "nl_weighted_pinch_norm",
        "nl_suite_run",
        "nl_report_free",
        "nl_report_counts",
        "nl_report_json",
        "nl_report_write",
        "nl_string_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("typedef struct NlOperator NlOperator;"));
    assert!(header.contains("NL_STATUS_NULL_POINTER = 1"));
}

#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    if !deps.join("libnecklab_ffi.so").exists() {
        eprintln!("shared library not found in {}; skipping", deps.display());
        return;
    }
    let manifest = env!("CARGO_MANIFEST_DIR");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(cc)
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(format!("-L{}", deps.display()))
        .arg(format!("-Wl,-rpath,{}", deps.display()))
        .arg("-lnecklab_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0].parse::<f64>().unwrap(), 6.0);
    assert!((fields[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-3);
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}

//! C ABI for the necklab library.
//!
//! Every function returns an [`NlStatus`]. Results are written through out
//! pointers; on failure the out pointers are left untouched and
//! `nl_last_error` describes the failure on the calling thread. Handles are
//! opaque and released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use necklab::cli::{run, write_outputs, Outcome, Overrides, SuiteConfig};
use necklab::curvature::{
    cylinder_operator, is_uniformly_pic, min_isotropic, sphere_operator, weighted_pinch_norm, CurvatureOperator,
    IsoMode, PicSearch,
};
use necklab::warped::cylinder_scalar_curvature;
use necklab::LabError;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Computation = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlIsoMode {
    Pic = 0,
    Pic1 = 1,
    Pic2 = 2,
}

/// Opaque curvature operator.
pub struct NlOperator(CurvatureOperator);

/// Opaque result of a suite run.
pub struct NlReport(Outcome);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &LabError) -> NlStatus {
    match e {
        LabError::Dimension { .. }
        | LabError::Invalid(_)
        | LabError::NonOrthonormalFrame { .. }
        | LabError::NonNegativeTime { .. }
        | LabError::OutsideWindow { .. }
        | LabError::Window { .. }
        | LabError::Inadmissible { .. }
        | LabError::Hypothesis(_) => NlStatus::InvalidArgument,
        LabError::Io(_) => NlStatus::Io,
        _ => NlStatus::Computation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NlStatus, String)>) -> NlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NlStatus::Panic
        }
    }
}

fn lab<T>(r: necklab::Result<T>) -> Result<T, (NlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NlStatus, String) {
    (NlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (NlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, v: T) {
    ptr::write(out, v);
}

/// Message for the last failing call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn nl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Unit cylinder `S^{n-1} × R`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_cylinder(n: usize, out: *mut *mut NlOperator) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let op = lab(cylinder_operator(n))?;
        write(out, Box::into_raw(Box::new(NlOperator(op))));
        Ok(())
    })
}

/// Unit round sphere `S^n`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_sphere(n: usize, out: *mut *mut NlOperator) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let op = lab(sphere_operator(n))?;
        write(out, Box::into_raw(Box::new(NlOperator(op))));
        Ok(())
    })
}

/// Operator from `n^4` components `R_ijkl` in row-major order.
///
/// # Safety
/// `components` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_from_components(
    n: usize,
    components: *const f64,
    len: usize,
    out: *mut *mut NlOperator,
) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = slice(components, len, "components")?;
        let op = lab(CurvatureOperator::from_components(n, c.to_vec()))?;
        write(out, Box::into_raw(Box::new(NlOperator(op))));
        Ok(())
    })
}

/// Releases an operator. Null is ignored.
///
/// # Safety
/// `op` must come from an `nl_operator_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_free(op: *mut NlOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_dimension(op: *const NlOperator, out: *mut usize) -> NlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, op.0.n());
        Ok(())
    })
}

/// # Safety
/// `op` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_scalar(op: *const NlOperator, out: *mut f64) -> NlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, op.0.scal());
        Ok(())
    })
}

/// Minimum of the isotropic-curvature form over orthonormal 4-frames.
///
/// # Safety
/// `op` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_min_isotropic(
    op: *const NlOperator,
    mode: NlIsoMode,
    budget: usize,
    seed: u64,
    out: *mut f64,
) -> NlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            NlIsoMode::Pic => IsoMode::Pic,
            NlIsoMode::Pic1 => IsoMode::Pic1,
            NlIsoMode::Pic2 => IsoMode::Pic2,
        };
        let m = lab(min_isotropic(&op.0, mode, budget, seed))?;
        write(out, m.value);
        Ok(())
    })
}

/// Signed uniform-PIC margin for constant `alpha`; `holds` is set when the margin is nonnegative.
///
/// # Safety
/// `op`, `holds` and `margin` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_operator_uniform_pic(
    op: *const NlOperator,
    alpha: f64,
    budget: usize,
    seed: u64,
    holds: *mut bool,
    margin: *mut f64,
) -> NlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if holds.is_null() || margin.is_null() {
            return Err(null("holds or margin"));
        }
        let u = lab(is_uniformly_pic(&op.0, alpha, PicSearch { budget, seed }))?;
        write(holds, u.holds);
        write(margin, u.margin);
        Ok(())
    })
}

/// `(n−1)/(−2t)` for `t < 0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_cylinder_scalar_curvature(n: usize, t: f64, out: *mut f64) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, lab(cylinder_scalar_curvature(n, t))?);
        Ok(())
    })
}

/// `inf { λ : −λ(Ric − ρI) ≤ h ≤ λ(Ric − ρI) }` for symmetric `n × n` matrices in row-major order.
///
/// # Safety
/// `h` and `ric` must point to `n * n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_weighted_pinch_norm(
    n: usize,
    h: *const f64,
    ric: *const f64,
    rho: f64,
    out: *mut f64,
) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(n).ok_or((NlStatus::InvalidArgument, "n too large".into()))?;
        let h = DMatrix::from_row_slice(n, n, slice(h, len, "h")?);
        let ric = DMatrix::from_row_slice(n, n, slice(ric, len, "ric")?);
        write(out, lab(weighted_pinch_norm(&h, &ric, rho))?);
        Ok(())
    })
}

/// Runs a suite described by a JSON config (same keys as the `neck-lab --config` file).
/// Null `config_json` runs the default configuration.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_suite_run(config_json: *const c_char, out: *mut *mut NlReport) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let json = if config_json.is_null() { None } else { Some(c_str(config_json, "config_json")?) };
        let cfg = lab(SuiteConfig::resolve(json, &Overrides::default(), None))?;
        let outcome = lab(run(&cfg))?;
        write(out, Box::into_raw(Box::new(NlReport(outcome))));
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from `nl_suite_run` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nl_report_free(report: *mut NlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Passed and failed case counts.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_report_counts(report: *const NlReport, passed: *mut usize, failed: *mut usize) -> NlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if passed.is_null() || failed.is_null() {
            return Err(null("passed or failed"));
        }
        write(passed, r.0.report.passed);
        write(failed, r.0.report.failed);
        Ok(())
    })
}

/// The report as JSON; release with `nl_string_free`.
///
/// # Safety
/// `report` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nl_report_json(report: *const NlReport, out: *mut *mut c_char) -> NlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(r.0.report.to_json()).map_err(|e| (NlStatus::Computation, e.to_string()))?;
        write(out, s.into_raw());
        Ok(())
    })
}

/// Writes report.json, timing.json and the CSV plot files into `dir`.
///
/// # Safety
/// `report` must be valid and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nl_report_write(report: *const NlReport, dir: *const c_char) -> NlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let dir = c_str(dir, "dir")?;
        lab(write_outputs(&r.0, Path::new(dir)))?;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

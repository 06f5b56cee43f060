//! C ABI for the pipeline: configuration, single-ε cases, the ε-sweep and
//! rate fitting behind opaque handles.
//!
//! Every fallible function returns a `PmStatus`. On failure the message is
//! kept per thread and can be read with `pm_last_error_message`. Handles are
//! created by the library and must be released with the matching `*_free`.

use prandtl_mhd::study::{
    emit_report, fit_rate, run_pipeline, run_study, CaseResult, ConvergenceReport, StudyConfig,
};
use prandtl_mhd::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Gate = 4,
    Cfl = 5,
    Blowup = 6,
    Positivity = 7,
    InitialData = 8,
    Io = 9,
    NoData = 10,
    Fit = 11,
    Numerical = 12,
    Panic = 13,
}

/// Opaque study configuration.
pub struct PmConfig(StudyConfig);

/// Opaque result of one ε case.
pub struct PmCase(CaseResult);

/// Opaque convergence report of an ε-sweep.
pub struct PmReport(ConvergenceReport);

/// One row of the convergence table.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PmRow {
    pub eps: f64,
    pub linf_error: f64,
    pub l2_error: f64,
    pub linf: [f64; 4],
    pub remainder_l2: [f64; 4],
    pub walltime_s: f64,
}

/// Least-squares fit of log error against log ε.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PmRateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci95: f64,
    pub n_points: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PmStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Config(_) => PmStatus::Config,
        Error::Gate { .. } => PmStatus::Gate,
        Error::Cfl { .. } => PmStatus::Cfl,
        Error::Blowup { .. } | Error::NonFinite { .. } => PmStatus::Blowup,
        Error::Positivity { .. } => PmStatus::Positivity,
        Error::InitialData(_) => PmStatus::InitialData,
        Error::Io(_) | Error::Format(_) => PmStatus::Io,
        Error::NoData => PmStatus::NoData,
        Error::Fit(_) => PmStatus::Fit,
        Error::Shape(_) | Error::Grid(_) | Error::TimeWindow(_) | Error::Missing(_) => PmStatus::InvalidArgument,
        _ => PmStatus::Numerical,
    }
}

/// Run `f`, translating errors and panics into a status and the stored message.
fn guard(f: impl FnOnce() -> Result<(), (PmStatus, String)>) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PmStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(m);
            PmStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PmStatus, String) {
    (PmStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn put<T>(out: *mut *mut T, v: T) -> Result<(), (PmStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(v)) };
    Ok(())
}

/// # Safety
/// `h` must be null or a live handle of type `T` from this library.
unsafe fn borrow<'a, T>(h: *const T, what: &str) -> Result<&'a T, (PmStatus, String)> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let m = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = m.len().min(len - 1);
            std::ptr::copy_nonoverlapping(m.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        m.len()
    })
}

/// Default configuration.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pm_config_default(out: *mut *mut PmConfig) -> PmStatus {
    guard(|| put(out, PmConfig(StudyConfig::default())))
}

/// Parse `key = value` text on top of the defaults.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pm_config_parse(source: *const c_char, out: *mut *mut PmConfig) -> PmStatus {
    guard(|| {
        let s = text(source, "config text")?;
        put(out, PmConfig(StudyConfig::parse(s).map_err(lib)?))
    })
}

/// Replace the ε list (must stay strictly decreasing in (0, 1]).
///
/// # Safety
/// `cfg` must be a live config handle; `eps` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_config_set_eps_list(cfg: *mut PmConfig, eps: *const f64, n: usize) -> PmStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        if eps.is_null() && n > 0 {
            return Err(null("eps"));
        }
        let list = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(eps, n).to_vec() };
        let mut next = c.0.clone();
        next.eps_list = list;
        next.validate().map_err(lib)?;
        c.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pm_config_free(cfg: *mut PmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the whole pipeline at one ε.
///
/// # Safety
/// `cfg` must be a live config handle; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pm_run_pipeline(cfg: *const PmConfig, eps: f64, out: *mut *mut PmCase) -> PmStatus {
    guard(|| {
        let c = borrow(cfg, "config")?;
        put(out, PmCase(run_pipeline(&c.0, eps).map_err(lib)?))
    })
}

/// Sup-time L∞ and L² errors against the comparand.
///
/// # Safety
/// `case` must be a live case handle; the outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn pm_case_errors(case: *const PmCase, linf: *mut f64, l2: *mut f64) -> PmStatus {
    guard(|| {
        let c = borrow(case, "case")?;
        if let Some(p) = linf.as_mut() {
            *p = c.0.errors.sup_linf();
        }
        if let Some(p) = l2.as_mut() {
            *p = c.0.errors.sup_l2();
        }
        Ok(())
    })
}

/// The convergence-table row of a case.
///
/// # Safety
/// `case` must be a live case handle; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_case_row(case: *const PmCase, row: *mut PmRow) -> PmStatus {
    guard(|| {
        let c = borrow(case, "case")?;
        let r = c.0.row();
        let o = row.as_mut().ok_or_else(|| null("row"))?;
        *o = PmRow {
            eps: r.eps,
            linf_error: r.linf_error,
            l2_error: r.l2_error,
            linf: r.linf,
            remainder_l2: r.remainder_l2,
            walltime_s: r.walltime_s,
        };
        Ok(())
    })
}

/// # Safety
/// `case` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pm_case_free(case: *mut PmCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Run the ε-sweep on `jobs` workers. Failed ε cases are recorded in the
/// report; see `pm_report_failures`.
///
/// # Safety
/// `cfg` must be a live config handle; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pm_run_study(cfg: *const PmConfig, jobs: usize, out: *mut *mut PmReport) -> PmStatus {
    guard(|| {
        let c = borrow(cfg, "config")?;
        put(out, PmReport(run_study(&c.0, jobs).map_err(lib)?.0))
    })
}

/// Number of completed rows.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn pm_report_rows(report: *const PmReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.rows.len())
}

/// Number of failed ε cases.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn pm_report_failures(report: *const PmReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.failures.len())
}

/// Row `k` of the convergence table.
///
/// # Safety
/// `report` must be a live report handle; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_report_row(report: *const PmReport, k: usize, row: *mut PmRow) -> PmStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let src = r.0.rows.get(k).ok_or_else(|| (PmStatus::InvalidArgument, format!("row {k} out of range")))?;
        let o = row.as_mut().ok_or_else(|| null("row"))?;
        *o = PmRow {
            eps: src.eps,
            linf_error: src.linf_error,
            l2_error: src.l2_error,
            linf: src.linf,
            remainder_l2: src.remainder_l2,
            walltime_s: src.walltime_s,
        };
        Ok(())
    })
}

/// Fitted rate of the L∞ error. Fails with `NoData` when no fit exists.
///
/// # Safety
/// `report` must be a live report handle; `fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_report_fit(report: *const PmReport, fit: *mut PmRateFit) -> PmStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let f = r.0.fit.ok_or((PmStatus::NoData, "fewer than three usable points".to_string()))?;
        let o = fit.as_mut().ok_or_else(|| null("fit"))?;
        *o = PmRateFit { slope: f.slope, intercept: f.intercept, ci95: f.ci95, n_points: f.n_points };
        Ok(())
    })
}

/// Write convergence.csv and rate.txt into `dir`.
///
/// # Safety
/// `report` must be a live report handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn pm_report_emit(report: *const PmReport, dir: *const c_char) -> PmStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let d = text(dir, "dir")?;
        emit_report(&r.0, Path::new(d)).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pm_report_free(report: *mut PmReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Fit error ≈ C ε^slope over `n` pairs.
///
/// # Safety
/// `eps` and `errors` must point to `n` doubles; `fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_fit_rate(eps: *const f64, errors: *const f64, n: usize, fit: *mut PmRateFit) -> PmStatus {
    guard(|| {
        if eps.is_null() || errors.is_null() {
            return Err(null("input array"));
        }
        let (e, r) = (std::slice::from_raw_parts(eps, n), std::slice::from_raw_parts(errors, n));
        let f = fit_rate(e, r).map_err(lib)?;
        let o = fit.as_mut().ok_or_else(|| null("fit"))?;
        *o = PmRateFit { slope: f.slope, intercept: f.intercept, ci95: f.ci95, n_points: f.n_points };
        Ok(())
    })
}

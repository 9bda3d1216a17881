//! C ABI over the confnet engine.
//!
//! Every fallible call returns a [`ConfnetStatus`]; on anything but
//! `CONFNET_STATUS_OK` the message is available from
//! [`confnet_last_error`] on the same thread. Handles are opaque and owned by
//! the caller, who releases them with the matching `_free` function.
//! Strings returned by the library are released with [`confnet_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use confnet::calculus::MetricField;
use confnet::cli::{self, Command, Format, Options};
use confnet::scalar::{eval_jet2, parse_with, Expr};
use confnet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    Dimension = 5,
    Manifest = 6,
    Geometry = 7,
    UnknownCommand = 8,
    Io = 9,
    Panic = 10,
    Other = 11,
}

impl From<&Error> for ConfnetStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => ConfnetStatus::Parse,
            Error::Domain { .. } | Error::OutOfDomain { .. } | Error::StepTooLarge { .. } => ConfnetStatus::Domain,
            Error::Dimension(_) => ConfnetStatus::Dimension,
            Error::Manifest { .. } => ConfnetStatus::Manifest,
            Error::Io(_) => ConfnetStatus::Io,
            Error::InvalidChart(_)
            | Error::NotSpd { .. }
            | Error::NotSymmetric(_)
            | Error::DegenerateFrame { .. }
            | Error::InvalidNet(_)
            | Error::KindConstraint(_)
            | Error::NonPositive { .. }
            | Error::NotSelfAdjoint { .. }
            | Error::Coalescence { .. }
            | Error::NotCodazzi { .. }
            | Error::ConstantEigenvalueViolated(_) => ConfnetStatus::Geometry,
            _ => ConfnetStatus::Other,
        }
    }
}

/// A parsed scalar expression in a fixed number of variables.
pub struct ConfnetExpr {
    expr: Expr,
    dim: usize,
}

/// A metric on a chart.
pub struct ConfnetMetric {
    metric: MetricField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ConfnetStatus, message: impl Into<String>) -> ConfnetStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> ConfnetStatus {
    let status = ConfnetStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into `CONFNET_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> ConfnetStatus) -> ConfnetStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ConfnetStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ConfnetStatus> {
    if p.is_null() {
        return Err(fail(ConfnetStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ConfnetStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn confnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn confnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `text` in the variables `names[0..dim]`.
///
/// # Safety
/// `text` and each of the `dim` entries of `names` must be NUL-terminated
/// strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn confnet_expr_parse(
    text: *const c_char,
    names: *const *const c_char,
    dim: usize,
    out: *mut *mut ConfnetExpr,
) -> ConfnetStatus {
    guard(|| {
        if out.is_null() || (names.is_null() && dim > 0) {
            return fail(ConfnetStatus::NullPointer, "null output or names");
        }
        let text = tri!(str_arg(text, "text"));
        let mut vars = Vec::with_capacity(dim);
        for i in 0..dim {
            vars.push(tri!(str_arg(*names.add(i), "variable name")).to_string());
        }
        match parse_with(text, &vars, &[]) {
            Ok(expr) => {
                *out = Box::into_raw(Box::new(ConfnetExpr { expr, dim }));
                ConfnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Value, gradient (`dim` entries) and row-major Hessian (`dim * dim`
/// entries) of `expr` at `point`. `grad` and `hess` may be null.
///
/// # Safety
/// `expr` must come from [`confnet_expr_parse`]; the buffers must hold the
/// stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn confnet_expr_eval(
    expr: *const ConfnetExpr,
    point: *const f64,
    value: *mut f64,
    grad: *mut f64,
    hess: *mut f64,
) -> ConfnetStatus {
    guard(|| {
        let Some(e) = expr.as_ref() else {
            return fail(ConfnetStatus::NullPointer, "expr is null");
        };
        if point.is_null() || value.is_null() {
            return fail(ConfnetStatus::NullPointer, "null point or value");
        }
        let p = std::slice::from_raw_parts(point, e.dim);
        let jet = match eval_jet2(&e.expr, p) {
            Ok(j) => j,
            Err(err) => return from_error(err),
        };
        *value = jet.value;
        if !grad.is_null() {
            for i in 0..e.dim {
                *grad.add(i) = jet.grad[i];
            }
        }
        if !hess.is_null() {
            for i in 0..e.dim {
                for j in 0..e.dim {
                    *hess.add(i * e.dim + j) = jet.hess[(i, j)];
                }
            }
        }
        ConfnetStatus::Ok
    })
}

/// # Safety
/// `expr` must be null or come from [`confnet_expr_parse`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn confnet_expr_free(expr: *mut ConfnetExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Builds the metric described by a manifest given as JSON text.
///
/// # Safety
/// `manifest_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn confnet_metric_from_manifest(
    manifest_json: *const c_char,
    out: *mut *mut ConfnetMetric,
) -> ConfnetStatus {
    guard(|| {
        if out.is_null() {
            return fail(ConfnetStatus::NullPointer, "out is null");
        }
        let text = tri!(str_arg(manifest_json, "manifest"));
        match cli::parse_manifest(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(ConfnetMetric { metric: m.metric }));
                ConfnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Chart dimension of `metric`, or 0 for null.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn confnet_metric_dim(metric: *const ConfnetMetric) -> usize {
    metric.as_ref().map_or(0, |m| m.metric.dim())
}

/// Metric components at `point`, row-major into `g` (`dim * dim` doubles).
///
/// # Safety
/// `metric` must be a live handle; `point` holds `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn confnet_metric_eval(
    metric: *const ConfnetMetric,
    point: *const f64,
    g: *mut f64,
) -> ConfnetStatus {
    guard(|| {
        let Some(m) = metric.as_ref() else {
            return fail(ConfnetStatus::NullPointer, "metric is null");
        };
        if point.is_null() || g.is_null() {
            return fail(ConfnetStatus::NullPointer, "null point or output");
        }
        let n = m.metric.dim();
        let p = std::slice::from_raw_parts(point, n);
        match m.metric.metric_at(p) {
            Ok((gm, _)) => {
                for i in 0..n {
                    for j in 0..n {
                        *g.add(i * n + j) = gm[(i, j)];
                    }
                }
                ConfnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Christoffel symbols `Γ^k_ij` at `point`, written to
/// `out[(k * dim + i) * dim + j]` (`dim³` doubles).
///
/// # Safety
/// `metric` must be a live handle; `point` holds `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn confnet_metric_christoffel(
    metric: *const ConfnetMetric,
    point: *const f64,
    out: *mut f64,
) -> ConfnetStatus {
    guard(|| {
        let Some(m) = metric.as_ref() else {
            return fail(ConfnetStatus::NullPointer, "metric is null");
        };
        if point.is_null() || out.is_null() {
            return fail(ConfnetStatus::NullPointer, "null point or output");
        }
        let n = m.metric.dim();
        let p = std::slice::from_raw_parts(point, n);
        match m.metric.christoffel(p) {
            Ok(gamma) => {
                for (k, gk) in gamma.iter().enumerate() {
                    for i in 0..n {
                        for j in 0..n {
                            *out.add((k * n + i) * n + j) = gk[(i, j)];
                        }
                    }
                }
                ConfnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `metric` must be null or a live handle, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn confnet_metric_free(metric: *mut ConfnetMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Runs a command (`classify`, `verify-product`, `factorize`, `codazzi`,
/// `selftest`) on a manifest given as JSON text, which may be null for
/// `selftest`. On success `*report` receives the JSON report and
/// `*exit_code` the command-line exit code (0 pass, 2 fail, 3 inconclusive).
///
/// # Safety
/// String arguments must be NUL-terminated; `report` and `exit_code` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn confnet_run(
    manifest_json: *const c_char,
    command: *const c_char,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> ConfnetStatus {
    guard(|| {
        if report.is_null() || exit_code.is_null() {
            return fail(ConfnetStatus::NullPointer, "null output");
        }
        let name = tri!(str_arg(command, "command"));
        let Some(command) = Command::parse(name) else {
            return fail(ConfnetStatus::UnknownCommand, format!("unknown command '{name}'"));
        };
        let manifest = if manifest_json.is_null() {
            None
        } else {
            match cli::parse_manifest(tri!(str_arg(manifest_json, "manifest"))) {
                Ok(m) => Some(m),
                Err(e) => return from_error(e),
            }
        };
        match cli::run_on(&Options::new(command), manifest) {
            Ok(r) => {
                let bytes = cli::emit(&r, Format::Json);
                *report = CString::new(bytes).map_or(ptr::null_mut(), CString::into_raw);
                *exit_code = r.outcome.exit_code();
                ConfnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn confnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

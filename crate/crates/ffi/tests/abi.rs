use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use confnet_ffi::*;

const POLAR: &str = include_str!("../../core/fixtures/polar.json");
const TWISTED: &str = include_str!("../../core/fixtures/twisted_control.json");

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = confnet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn expression_jet() {
    let names = [cstr("x"), cstr("y")];
    let ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
    let mut e = ptr::null_mut();
    let s = unsafe { confnet_expr_parse(cstr("x^2*y + exp(y)").as_ptr(), ptrs.as_ptr(), 2, &mut e) };
    assert_eq!(s, ConfnetStatus::Ok);
    let (mut v, mut g, mut h) = (0.0, [0.0; 2], [0.0; 4]);
    let p = [1.5, -0.5];
    let s = unsafe { confnet_expr_eval(e, p.as_ptr(), &mut v, g.as_mut_ptr(), h.as_mut_ptr()) };
    assert_eq!(s, ConfnetStatus::Ok);
    let ey = (-0.5f64).exp();
    assert!((v - (-1.125 + ey)).abs() < 1e-15);
    assert!((g[0] - 2.0 * 1.5 * -0.5).abs() < 1e-15);
    assert!((g[1] - (2.25 + ey)).abs() < 1e-15);
    assert_eq!(h[1], h[2]);
    assert!((h[1] - 3.0).abs() < 1e-15);
    assert!((h[3] - ey).abs() < 1e-15);
    unsafe { confnet_expr_free(e) };
}

#[test]
fn errors_map_to_codes() {
    let names = [cstr("x")];
    let ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
    let mut e = ptr::null_mut();
    let s = unsafe { confnet_expr_parse(cstr("x + z").as_ptr(), ptrs.as_ptr(), 1, &mut e) };
    assert_eq!(s, ConfnetStatus::Parse);
    assert!(last_error().contains('z'));
    assert!(e.is_null());

    let s = unsafe { confnet_expr_parse(cstr("log(x)").as_ptr(), ptrs.as_ptr(), 1, &mut e) };
    assert_eq!(s, ConfnetStatus::Ok);
    let mut v = 0.0;
    let p = [-1.0];
    let s = unsafe { confnet_expr_eval(e, p.as_ptr(), &mut v, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, ConfnetStatus::Domain);
    unsafe { confnet_expr_free(e) };

    let s = unsafe { confnet_expr_parse(ptr::null(), ptrs.as_ptr(), 1, &mut e) };
    assert_eq!(s, ConfnetStatus::NullPointer);

    let mut m = ptr::null_mut();
    let s = unsafe { confnet_metric_from_manifest(cstr("{\"chart\": 3}").as_ptr(), &mut m) };
    assert_eq!(s, ConfnetStatus::Manifest);
    assert!(last_error().contains("/chart"));
}

#[test]
fn polar_christoffel_symbols() {
    let mut m = ptr::null_mut();
    let s = unsafe { confnet_metric_from_manifest(cstr(POLAR).as_ptr(), &mut m) };
    assert_eq!(s, ConfnetStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { confnet_metric_dim(m) }, 2);
    let p = [2.0, 0.3];
    let mut g = [0.0; 4];
    assert_eq!(
        unsafe { confnet_metric_eval(m, p.as_ptr(), g.as_mut_ptr()) },
        ConfnetStatus::Ok
    );
    assert_eq!(g, [1.0, 0.0, 0.0, 4.0]);
    let mut gamma = [0.0; 8];
    assert_eq!(
        unsafe { confnet_metric_christoffel(m, p.as_ptr(), gamma.as_mut_ptr()) },
        ConfnetStatus::Ok
    );
    // Γ^r_tt = -r, Γ^t_rt = Γ^t_tr = 1/r, all others zero.
    let expected = [0.0, 0.0, 0.0, -2.0, 0.0, 0.5, 0.5, 0.0];
    for (a, b) in gamma.iter().zip(expected) {
        assert!((a - b).abs() < 1e-14, "{gamma:?}");
    }
    unsafe { confnet_metric_free(m) };
}

fn run(manifest: Option<&str>, command: &str) -> (ConfnetStatus, Option<serde_json::Value>, i32) {
    let m = manifest.map(cstr);
    let mut report = ptr::null_mut();
    let mut code = -1;
    let s = unsafe {
        confnet_run(
            m.as_ref().map_or(ptr::null(), |m| m.as_ptr()),
            cstr(command).as_ptr(),
            &mut report,
            &mut code,
        )
    };
    if s != ConfnetStatus::Ok {
        return (s, None, code);
    }
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_string();
    unsafe { confnet_string_free(report) };
    (s, Some(serde_json::from_str(&text).unwrap()), code)
}

#[test]
fn commands_report_exit_codes() {
    let (s, r, code) = run(Some(POLAR), "classify");
    assert_eq!(s, ConfnetStatus::Ok);
    assert_eq!(code, 0);
    assert_eq!(r.unwrap()["outcome"], "pass");

    let (_, r, code) = run(Some(TWISTED), "classify");
    assert_eq!(code, 2);
    assert_eq!(r.unwrap()["outcome"], "fail");

    assert_eq!(run(Some(POLAR), "explode").0, ConfnetStatus::UnknownCommand);
    assert_eq!(run(None, "classify").0, ConfnetStatus::Other);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(confnet_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke test against the generated header and the static
/// library when a C compiler is on the path.
#[test]
fn c_program_links_against_header() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libconfnet_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("confnet_smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

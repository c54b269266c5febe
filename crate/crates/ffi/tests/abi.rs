use std::ffi::CString;
use std::path::Path;
use std::process::Command as Proc;
use std::ptr;

use superheat_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { sh_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn nonlinearity(spec: &str) -> *mut ShNonlinearity {
    let s = CString::new(spec).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sh_nonlinearity_new(s.as_ptr(), &mut h) }, ShStatus::Ok);
    h
}

#[test]
fn structure_round_trip_for_power() {
    let nl = nonlinearity("power(3)");
    let (mut f, mut back, mut a) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(sh_structure(nl, 2.0, &mut f), ShStatus::Ok);
        assert_eq!(sh_structure_inv(nl, f, &mut back), ShStatus::Ok);
        assert_eq!(sh_growth_constant(nl, &mut a), ShStatus::Ok);
        sh_nonlinearity_free(nl);
    }
    assert!((f - 0.125).abs() < 1e-14);
    assert!((back - 2.0).abs() < 1e-12);
    assert!((a - 1.5).abs() < 1e-6);
}

#[test]
fn errors_are_reported_not_panicked() {
    let bad = CString::new("power(0.5)").unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { sh_nonlinearity_new(bad.as_ptr(), &mut h) };
    assert_eq!(st, ShStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let mut v = 0.0;
    assert_eq!(unsafe { sh_structure(ptr::null(), 1.0, &mut v) }, ShStatus::NullPointer);
    assert!(last_error().contains("null"));

    let nl = nonlinearity("exp");
    assert_eq!(unsafe { sh_structure_inv(nl, -1.0, &mut v) }, ShStatus::Numeric);
    unsafe { sh_nonlinearity_free(nl) };
}

#[test]
fn truncated_error_buffer_is_terminated() {
    let mut v = 0.0;
    unsafe { sh_structure(ptr::null(), 1.0, &mut v) };
    let mut buf = [1 as std::ffi::c_char; 4];
    let n = unsafe { sh_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn grid_norm_and_classify() {
    let n = 16usize;
    let values = vec![2.0; n * n];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(sh_grid_periodic(2, n, 8.0, values.as_ptr(), values.len(), &mut g), ShStatus::Ok);
        let mut len = 0;
        assert_eq!(sh_grid_len(g, &mut len), ShStatus::Ok);
        assert_eq!(len, n * n);
        let mut small = vec![0.0; 3];
        assert_eq!(sh_grid_values(g, small.as_mut_ptr(), small.len()), ShStatus::BufferTooSmall);
        let mut copy = vec![0.0; len];
        assert_eq!(sh_grid_values(g, copy.as_mut_ptr(), len), ShStatus::Ok);
        assert_eq!(copy, values);

        let mut sup = 0.0;
        assert_eq!(sh_uloc_norm(g, f64::INFINITY, 1.0, &mut sup), ShStatus::Ok);
        assert_eq!(sup, 2.0);

        let nl = nonlinearity("power(2)");
        let mut v = std::mem::zeroed::<ShVerdict>();
        assert_eq!(sh_classify(nl, g, 2, 1.5, 1.0, &mut v), ShStatus::Ok);
        assert_eq!(v.regime, ShRegime::SubcriticalExists);
        assert_eq!(v.integral_finite, 1);
        assert!(v.t_lower > 0.0);
        sh_nonlinearity_free(nl);
        sh_grid_free(g);
    }
}

#[test]
fn wrong_value_count_is_rejected() {
    let values = [1.0; 10];
    let mut g = ptr::null_mut();
    let st = unsafe { sh_grid_periodic(2, 4, 1.0, values.as_ptr(), values.len(), &mut g) };
    assert_eq!(st, ShStatus::InvalidArgument);
    assert!(g.is_null());
}

#[test]
fn scenario_run_matches_cli_exit_codes() {
    let dir = std::env::temp_dir().join(format!("superheat-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("norms.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"nonlinearity":"power(2)","grid":{"kind":"periodic","dim":1,"n":32,"side":4.0},"data":{"kind":"constant","value":3.0},"norms":["inf"]}"#,
    )
    .unwrap();
    let c = |s: &Path| CString::new(s.to_str().unwrap()).unwrap();
    let cmd = CString::new("norms").unwrap();
    let mut code = -1;
    let st = unsafe { sh_run_scenario(cmd.as_ptr(), c(&cfg).as_ptr(), c(&dir.join("out")).as_ptr(), 1, 0, &mut code) };
    assert_eq!(st, ShStatus::Ok);
    assert_eq!(code, 0);
    assert!(dir.join("out/summary.json").exists());

    let bogus = CString::new("plot").unwrap();
    let st = unsafe { sh_run_scenario(bogus.as_ptr(), c(&cfg).as_ptr(), c(&dir).as_ptr(), 1, 0, &mut code) };
    assert_eq!(st, ShStatus::InvalidArgument);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/superheat.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["sh_nonlinearity_new", "sh_classify", "sh_last_error", "SH_STATUS_PANIC", "ShVerdict"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = Proc::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99"]).arg(&header).status() else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}

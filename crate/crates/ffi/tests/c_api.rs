use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sddhopf_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        sdd_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn hes1(c: f64, eps: f64) -> *mut SddModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sdd_model_hes1(c, eps, &mut m) }, SddStatus::Ok);
    m
}

#[test]
fn equilibrium_and_hopf_through_handles() {
    let m = hes1(0.01, 5.0);
    let mut eq = SddEquilibrium::default();
    let mut hp = SddHopf::default();
    unsafe {
        assert_eq!(sdd_equilibrium(m, &mut eq), SddStatus::Ok);
        assert_eq!(sdd_hopf(m, &mut hp), SddStatus::Ok);
        sdd_model_free(m);
    }
    assert!((eq.r_star - 11.97050076).abs() < 1e-7 * 11.97);
    assert!((eq.g1 - 10.0).abs() < 1e-12);
    assert!((hp.eps0 - 6.86216245).abs() < 1e-7 * 6.86);
    assert!(hp.dalpha_deps > 0.0);
}

#[test]
fn normal_form_direction_codes() {
    let m = hes1(0.01, 6.8);
    let mut nf = SddNormalForm::default();
    unsafe {
        assert_eq!(sdd_normal_form(m, &mut nf), SddStatus::Ok);
        assert_eq!(nf.direction, -1);
        assert!((nf.c0 - 0.02394886242).abs() < 1e-5 * 0.024);
        assert_eq!(sdd_model_set(m, 0.025, 6.8), SddStatus::Ok);
        assert_eq!(sdd_normal_form(m, &mut nf), SddStatus::Ok);
        assert_eq!(nf.direction, 1);
        sdd_model_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    let bad = CString::new(r#"{"model": {"mu_m": 1}}"#).unwrap();
    unsafe {
        assert_eq!(sdd_model_from_json(bad.as_ptr(), &mut m), SddStatus::Config);
        assert!(m.is_null());
        assert!(last_error().contains("config error"));
        assert_eq!(sdd_model_hes1(0.01, -1.0, &mut m), SddStatus::Config);
        assert_eq!(sdd_equilibrium(ptr::null(), ptr::null_mut()), SddStatus::NullPointer);
        assert!(last_error().contains("null pointer"));
    }
    // a successful call clears the message
    let m = hes1(0.01, 5.0);
    let mut eq = SddEquilibrium::default();
    unsafe {
        assert_eq!(sdd_equilibrium(m, &mut eq), SddStatus::Ok);
        assert_eq!(sdd_last_error(ptr::null_mut(), 0), 0);
        sdd_model_free(m);
    }
}

#[test]
fn stable_for_all_has_no_hopf_point() {
    let json = CString::new(
        r#"{"model": {"mu_m": 0.03, "mu_p": 0.04, "c": 0.0, "eps": 1.0,
            "nonlinearity": {"kind": "polynomial", "f": [1.0, -1e-4], "g": [0.0, 1.0]}}}"#,
    )
    .unwrap();
    let mut m = ptr::null_mut();
    let mut hp = SddHopf::default();
    unsafe {
        assert_eq!(sdd_model_from_json(json.as_ptr(), &mut m), SddStatus::Ok);
        assert_eq!(sdd_hopf(m, &mut hp), SddStatus::Solver);
        assert!(last_error().contains("stable for all eps"));
        sdd_model_free(m);
    }
}

#[test]
fn simulate_and_copy_columns() {
    let json = CString::new(
        r#"{"model": {"mu_m": 0.03, "mu_p": 0.04, "c": 0.01, "eps": 6.0,
            "nonlinearity": {"kind": "hes1", "alpha_m": 35.0, "alpha_p": 10.0, "y_bar": 1200.0, "hill": 5.0}},
            "analysis": {"simulate": {"t_end": 20.0, "solver": {"sample_dt": 0.5}}}}"#,
    )
    .unwrap();
    let mut m = ptr::null_mut();
    let mut tr = ptr::null_mut();
    unsafe {
        assert_eq!(sdd_model_from_json(json.as_ptr(), &mut m), SddStatus::Ok);
        assert_eq!(sdd_simulate(m, &mut tr), SddStatus::Ok);
        assert_eq!(sdd_trajectory_completed(tr), 1);
        let n = sdd_trajectory_len(tr);
        assert_eq!(n, 41);
        let (mut t, mut x) = (vec![0.0; n], vec![0.0; n]);
        let mut written = 0;
        assert_eq!(sdd_trajectory_copy(tr, t.as_mut_ptr(), x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n, &mut written), SddStatus::Ok);
        assert_eq!(written, n);
        assert_eq!(t[40], 20.0);
        assert!(x.iter().all(|v| v.is_finite() && *v > 0.0));
        let mut w2 = 0;
        assert_eq!(sdd_trajectory_copy(tr, t.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), 3, &mut w2), SddStatus::Ok);
        assert_eq!(w2, 3);
        sdd_trajectory_free(tr);
        sdd_model_free(m);
    }
}

#[test]
fn report_json_matches_schema_keys() {
    let m = hes1(0.01, 6.0);
    let mut s: *mut c_char = ptr::null_mut();
    unsafe {
        assert_eq!(sdd_report_json(m, SddReport::NormalForm, &mut s), SddStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        sdd_string_free(s);
        assert_eq!(v["direction"], "supercritical");
        assert_eq!(v["kappa1"].as_array().unwrap().len(), 2);
        assert_eq!(sdd_report_json(m, SddReport::Sweep, &mut s), SddStatus::Config);
        sdd_model_free(m);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/sddhopf.h");
    let text = std::fs::read_to_string(&header).expect("header is generated by the build script");
    for sym in ["sdd_model_hes1", "sdd_simulate", "sdd_trajectory_copy", "sdd_last_error", "SDD_STATUS_RESONANCE = 3"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let src = tempfile_c(
        r#"#include "sddhopf.h"
int main(void) {
    SddModel *m = 0;
    SddHopf hp;
    if (sdd_model_hes1(0.01, 6.0, &m) != SDD_STATUS_OK) return 1;
    SddStatus s = sdd_hopf(m, &hp);
    sdd_model_free(m);
    return s == SDD_STATUS_OK ? 0 : 1;
}
"#,
    );
    let out = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(dir.join("include")).arg(&src).output().expect("C compiler");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tempfile_c(body: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("sddhopf_ffi_check_{}.c", std::process::id()));
    std::fs::write(&path, body).unwrap();
    path
}

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dwlab_ffi::*;

const CONFIG: &str = r#"{
    "schema_version": 1, "id": "ffi", "dimension": 1,
    "grid": {"L": 40.0, "N": 256},
    "coeffs": {"beta": 0.0},
    "data": {"epsilon": 0.1, "u1_scale": 0.3},
    "time": {"s_end": 3.0, "ds_out": 0.1},
    "analysis": {"fit_window": [2.0, 20.0], "tail_from": 1.0}
}"#;

fn last_error() -> String {
    let p = dwlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn simulator_handle_life_cycle() {
    let cfg = CString::new(CONFIG).unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(dwlab_sim_new(cfg.as_ptr(), &mut sim), DwlabStatus::Ok);
        assert!(dwlab_last_error().is_null());
        let n = dwlab_sim_len(sim);
        assert_eq!(n, 256);
        let mut u0 = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        assert_eq!(dwlab_sim_copy_state(sim, u0.as_mut_ptr(), p0.as_mut_ptr(), n), DwlabStatus::Ok);
        assert_eq!(dwlab_sim_advance_to_s(sim, 1.0), DwlabStatus::Ok);
        // β = 0, μ = 1: B = t, so s = 1 is t = e - 1
        assert!((dwlab_sim_time(sim) - (1f64.exp() - 1.0)).abs() < 1e-12);
        let mut u = vec![0.0; n];
        assert_eq!(dwlab_sim_copy_state(sim, u.as_mut_ptr(), ptr::null_mut(), n), DwlabStatus::Ok);
        // mass obeys M'' + M' = 0 with b = 1
        let h = 80.0 / n as f64;
        let (m0, m1) = (u0.iter().sum::<f64>() * h, p0.iter().sum::<f64>() * h);
        let t = dwlab_sim_time(sim);
        let m = u.iter().sum::<f64>() * h;
        assert!((m - (m0 + m1 * (1.0 - (-t).exp()))).abs() < 1e-12);
        assert_eq!(
            dwlab_sim_copy_state(sim, u.as_mut_ptr(), ptr::null_mut(), n - 1),
            DwlabStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 256"));
        dwlab_sim_free(sim);
        dwlab_sim_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_codes() {
    let mut sim = ptr::null_mut();
    unsafe {
        let bad = CString::new("{not json").unwrap();
        assert_eq!(dwlab_sim_new(bad.as_ptr(), &mut sim), DwlabStatus::Config);
        assert!(sim.is_null());
        let invalid = CString::new(CONFIG.replace("\"beta\": 0.0", "\"beta\": 1.2")).unwrap();
        assert_eq!(dwlab_sim_new(invalid.as_ptr(), &mut sim), DwlabStatus::Validation);
        assert!(last_error().contains("beta"));
        assert_eq!(dwlab_sim_new(ptr::null(), &mut sim), DwlabStatus::NullPointer);
        assert_eq!(dwlab_sim_advance_to_s(ptr::null_mut(), 1.0), DwlabStatus::NullPointer);
        assert!(dwlab_sim_time(ptr::null()).is_nan());
        assert_eq!(dwlab_sim_len(ptr::null()), 0);
        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(dwlab_sim_new(bytes.as_ptr().cast(), &mut sim), DwlabStatus::InvalidUtf8);
    }
}

#[test]
fn blowup_is_reported() {
    let cfg = CONFIG
        .replace("\"coeffs\": {\"beta\": 0.0}", "\"coeffs\": {\"beta\": 0.0}, \"nonlinearity\": {\"terms\": [{\"coeff\": 1.0, \"p1\": 2.0, \"u_form\": \"abs\"}], \"allow_subcritical\": true}")
        .replace("\"epsilon\": 0.1", "\"epsilon\": 0.5");
    let cfg = CString::new(cfg).unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(dwlab_sim_new(cfg.as_ptr(), &mut sim), DwlabStatus::Ok);
        assert_eq!(dwlab_sim_advance_to_s(sim, 4.5), DwlabStatus::Blowup);
        assert!(last_error().contains("blow-up"));
        dwlab_sim_free(sim);
    }
}

#[test]
fn rates_and_damping_values() {
    let cfg = CString::new(CONFIG.replace("\"beta\": 0.0", "\"beta\": 0.5")).unwrap();
    let mut r = DwlabRates::default();
    let mut d = DwlabDamping::default();
    let mut t = 0.0;
    unsafe {
        assert_eq!(dwlab_rates_predict(cfg.as_ptr(), &mut r), DwlabStatus::Ok);
        // n = m = 1: min{1/2, 1/4, 1/3} - η
        assert!((r.lambda - 0.24).abs() < 1e-12);
        assert!((r.exponent - 0.49).abs() < 1e-12);
        assert_eq!(dwlab_damping(0.5, 2.0, 3.0, &mut d), DwlabStatus::Ok);
        assert_eq!(dwlab_t_of_s(0.5, 2.0, d.s, &mut t), DwlabStatus::Ok);
        assert_eq!(dwlab_damping(1.5, 1.0, 3.0, &mut d), DwlabStatus::Validation);
        assert_eq!(dwlab_damping(0.5, 1.0, 3.0, ptr::null_mut()), DwlabStatus::NullPointer);
    }
    // b = μ(1+t)^{-β}, B = ((1+t)^{1+β} - 1)/(μ(1+β))
    let mut d = DwlabDamping::default();
    unsafe { dwlab_damping(0.5, 2.0, 3.0, &mut d) };
    assert!((d.b - 1.0).abs() < 1e-12);
    assert!((d.big_b - 7.0 / 3.0).abs() < 1e-9);
    assert!((t - 3.0).abs() < 1e-9);
    assert!((d.eps - (-d.s).exp()).abs() < 1e-12);
}

#[test]
fn run_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = CString::new(CONFIG).unwrap();
    let root = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let mut outcome = DwlabOutcome::Blowup;
    unsafe {
        assert_eq!(dwlab_run(cfg.as_ptr(), root.as_ptr(), &mut outcome), DwlabStatus::Ok, "{}", {
            let p = dwlab_last_error();
            if p.is_null() { String::new() } else { CStr::from_ptr(p).to_string_lossy().into_owned() }
        });
    }
    assert_eq!(outcome, DwlabOutcome::Completed);
    assert!(tmp.path().join("ffi/summary.json").exists());
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/dwlab.h")
}

#[test]
fn header_is_valid_c() {
    let out = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-std=c99"])
        .arg(header())
        .output()
        .expect("a C compiler is required for the header check");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Compiles and runs a C program against the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libdwlab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        format!(
            r#"#include <stdio.h>
#include <math.h>
#include "dwlab.h"
int main(void) {{
    const char *cfg = {cfg:?};
    DwlabSim *sim = NULL;
    if (dwlab_sim_new(cfg, &sim) != DWLAB_STATUS_OK) {{ puts(dwlab_last_error()); return 1; }}
    if (dwlab_sim_advance_to_s(sim, 0.5) != DWLAB_STATUS_OK) return 2;
    size_t n = dwlab_sim_len(sim);
    double u[256];
    if (n != 256 || dwlab_sim_copy_state(sim, u, NULL, n) != DWLAB_STATUS_OK) return 3;
    double peak = 0.0;
    for (size_t i = 0; i < n; i++) if (fabs(u[i]) > peak) peak = fabs(u[i]);
    dwlab_sim_free(sim);
    DwlabRates r;
    if (dwlab_rates_predict(cfg, &r) != DWLAB_STATUS_OK) return 4;
    printf("%s %.6f %.2f\n", dwlab_version(), peak, r.exponent);
    return peak > 0.0 && peak < 0.1 ? 0 : 5;
}}
"#,
            cfg = CONFIG
        ),
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("a C compiler is required for the link check");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).ends_with("0.49\n"));
}

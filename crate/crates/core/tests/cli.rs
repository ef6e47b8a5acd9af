//! End-to-end checks of the `dwlab` binary: exit codes, messages and the
//! files each subcommand leaves behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dwlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dwlab"));
    c.env_remove("DWLAB_OUT");
    c
}

fn small(id: &str) -> Value {
    json!({
        "schema_version": 1,
        "id": id,
        "dimension": 1,
        "grid": {"L": 40.0, "N": 256},
        "scaled_grid": {"L": 16.0, "N": 256},
        "coeffs": {"beta": 0.0},
        "data": {"epsilon": 0.1, "u1_scale": 0.2},
        "time": {"s_end": 3.0, "ds_out": 0.1},
        "analysis": {"fit_window": [2.0, 20.0], "tail_from": 1.0}
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_rejects_beta_outside_range() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("bad-beta");
    cfg["coeffs"]["beta"] = json!(1.2);
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta ∈ [−1,1)"), "{}", stderr(&out));
}

#[test]
fn validate_rejects_m2_in_one_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("bad-m");
    cfg["data"]["m"] = json!(2.0);
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("m=1 (n=1)"), "{}", stderr(&out));
}

#[test]
fn validate_accepts_cubic_power_in_two_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("n2");
    cfg["dimension"] = json!(2);
    cfg["grid"] = json!({"L": 40.0, "N": 64});
    cfg["data"]["m"] = json!(3.0);
    cfg["nonlinearity"] = json!({"power": {"coeff": -1.0, "p": 3.0}});
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("typo");
    cfg["time"]["ds_outt"] = json!(0.1);
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("time"), "{}", stderr(&out));
}

#[test]
fn rates_predict_prints_the_rate_set() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("rates");
    cfg["coeffs"]["beta"] = json!(0.5);
    cfg["dimension"] = json!(2);
    cfg["grid"] = json!({"L": 40.0, "N": 64});
    cfg["data"]["m"] = json!(3.0);
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["rates", "predict", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["lambda0", "lambda1", "lambda", "exponent"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // (1 - β)/(1 + β) = 1/3 binds; exponent n/4 + λ
    assert!((v["lambda0"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((v["exponent"].as_f64().unwrap() - (0.5 + 1.0 / 3.0 - 0.01)).abs() < 1e-12);
}

#[test]
fn run_then_staged_stages_via_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "c.json", &small("env-run"));
    let root = tmp.path().join("out");
    let out = dwlab()
        .env("DWLAB_OUT", &root)
        .args(["run", "--config"])
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dir = root.join("env-run");
    for f in ["config.json", "summary.json", "timeseries.csv", "energy.csv", "ratefit.json"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    assert!(dir.join("snapshots").join("0.bin").exists());
    assert!(dir.join("decomp").join("0.bin").exists());
    let before = fs::read(dir.join("ratefit.json")).unwrap();
    for stage in ["decompose", "energy", "rates"] {
        let o = dwlab().args([stage, "--run"]).arg(&dir).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    assert_eq!(before, fs::read(dir.join("ratefit.json")).unwrap());
}

#[test]
fn focusing_square_blows_up_with_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("blow");
    cfg["grid"] = json!({"L": 60.0, "N": 512});
    cfg["data"] = json!({"epsilon": 0.5});
    cfg["nonlinearity"] = json!({
        "terms": [{"coeff": 1.0, "p1": 2.0, "u_form": "abs"}],
        "allow_subcritical": true
    });
    cfg["time"] = json!({"s_end": 4.0, "ds_out": 0.1, "t_max": 100.0});
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab()
        .args(["run", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("blow/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "blowup");
    assert!(summary["blowup"]["t"].as_f64().unwrap() < 100.0);
}

#[test]
fn subcritical_term_needs_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("subcritical");
    cfg["nonlinearity"] = json!({"terms": [{"coeff": 1.0, "p1": 2.0, "u_form": "abs"}]});
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("supercritical"));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("sw");
    cfg["sweep"] = json!({"coeffs.beta": [-0.5, 0.0, 0.5]});
    let p = write_config(tmp.path(), "c.json", &cfg);
    let out = dwlab()
        .args(["sweep", "--jobs", "3", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "{csv}");
    assert!(lines[0].starts_with("id,beta,p,predicted_exponent,slope,pass,outcome"));
    for (k, line) in lines[1..].iter().enumerate() {
        assert!(line.ends_with(",completed,"), "{csv}");
        assert!(tmp.path().join(format!("sw-{k}/summary.json")).exists());
    }
}

#[test]
fn selftest_passes_on_clean_checkout() {
    let out = dwlab().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(text.contains("hardy_random_1d") && text.contains("identity_order_deficit"));
}

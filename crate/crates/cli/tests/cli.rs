use std::path::{Path, PathBuf};
use std::process::Command;

use plap::catalog;
use plap::config::RunConfig;
use plap::run::sweep_rows;
use serde_json::{json, Value};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn plap(dir: &Path, args: &[&str], config: &Value) -> Run {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn json_of(r: &Run) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}\n{}", r.stdout, r.stderr))
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn read_csv(path: &PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn nonexistence_certificates_exit_zero() {
    let d = tmp();
    for (name, flag) in [("rito-sine", "necessary_sm_positive"), ("rito-sin2", "necessary_integral")] {
        let r = plap(d.path(), &["check"], &json!({"problem": {"catalog": name}}));
        assert_eq!(r.code, 0, "{}", r.stderr);
        let cert = json_of(&r);
        assert_eq!(cert["schema"], "cert_v1");
        assert_eq!(cert["verdict"], "nonexistence_proved");
        assert_eq!(cert[flag]["violated"], true, "{name}");
    }
}

#[test]
fn inconclusive_certificate_exits_two() {
    let d = tmp();
    let r = plap(d.path(), &["check"], &json!({"problem": {"catalog": "manufactured-sin2"}}));
    assert_eq!(r.code, 2);
    assert_eq!(json_of(&r)["verdict"], "inconclusive");
}

#[test]
fn singular_solve_writes_profile() {
    let d = tmp();
    let csv = d.path().join("u.csv");
    let r = plap(
        d.path(),
        &["solve-singular"],
        &json!({"problem": {"catalog": "manufactured-sin", "gamma": 0.5}, "output": {"csv_path": "u.csv"}}),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json_of(&r);
    assert_eq!(rep["schema"], "report_v1");
    assert_eq!(rep["converged"], true);
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["x", "v", "v_prime", "flux", "residual_cell"]);
    assert_eq!(rows.len(), 2049);
    for row in &rows {
        let x: f64 = row[0].parse().unwrap();
        let v: f64 = row[1].parse().unwrap();
        assert!((v - x.sin()).abs() < 1e-6);
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let d = tmp();
    let cfg = json!({"problem": {"catalog": "plateau"},
                     "output": {"csv_path": "u.csv", "json_path": "r.json"}});
    let a = plap(d.path(), &["solve-singular"], &cfg);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let (ja, ca) = (
        std::fs::read(d.path().join("r.json")).unwrap(),
        std::fs::read(d.path().join("u.csv")).unwrap(),
    );
    let b = plap(d.path(), &["solve-singular"], &cfg);
    assert_eq!(b.code, 0);
    assert_eq!(ja, std::fs::read(d.path().join("r.json")).unwrap());
    assert_eq!(ca, std::fs::read(d.path().join("u.csv")).unwrap());
}

#[test]
fn explicit_problem_round_trip() {
    let d = tmp();
    let spec = catalog::problem("plateau", None, None).unwrap();
    let explicit = serde_json::to_value(&spec).unwrap();
    let a = plap(d.path(), &["check"], &json!({"problem": {"catalog": "plateau"}}));
    let b = plap(d.path(), &["check"], &json!({"problem": explicit}));
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn input_errors_exit_one() {
    let d = tmp();
    let r = plap(d.path(), &["check"], &json!({"problem": {"catalog": "nope"}}));
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("rito-sine") && r.stderr.contains("plateau"), "{}", r.stderr);

    let r = plap(d.path(), &["check"], &json!({"problem": {"catalog": "plateau"}, "solver": {"fp_tol": -1.0}}));
    assert_eq!(r.code, 1);

    let r = plap(d.path(), &["check"], &json!({"problem": {"catalog": "plateau"}, "solver": {"grid_nn": 5}}));
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("solver"), "{}", r.stderr);

    let r = plap(d.path(), &["check"], &json!({"command": "sweep", "problem": {"catalog": "plateau"}}));
    assert_eq!(r.code, 1);

    let r = plap(d.path(), &["solve-f"], &json!({"problem": {"catalog": "plateau"}}));
    assert_eq!(r.code, 1);

    let out = Command::new(env!("CARGO_BIN_EXE_plap")).args(["check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overrides_apply() {
    let d = tmp();
    let r = plap(
        d.path(),
        &["check", "--override", "problem.catalog=rito-sin2", "--override", "solver.grid_n=1024"],
        &json!({"problem": {"catalog": "plateau"}}),
    );
    assert_eq!(r.code, 0);
    assert_eq!(json_of(&r)["verdict"], "nonexistence_proved");
}

#[test]
fn linear_solve_with_oracle() {
    let d = tmp();
    let r = plap(d.path(), &["solve-linear", "--oracle"], &json!({"problem": {"catalog": "rito-sin2"}}));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json_of(&r);
    assert!(rep["exact_sup_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(rep["oracle"]["agree"], true);
    assert!(rep["flux_identity_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn eigen_with_oracle() {
    let d = tmp();
    let r = plap(
        d.path(),
        &["eigen", "--oracle"],
        &json!({"problem": {"omega": [0.0, 1.0], "p": 3.0}, "output": {"csv_path": "phi.csv"}}),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json_of(&r);
    assert!(rep["oracle"]["relative_diff"].as_f64().unwrap() < 5e-3);
    let (header, _) = read_csv(&d.path().join("phi.csv"));
    assert_eq!(header, ["x", "v", "v_prime", "flux"]);
}

#[test]
fn verify_accepts_solver_output_and_rejects_damage() {
    let d = tmp();
    let base = json!({"problem": {"catalog": "manufactured-sin"}, "output": {"csv_path": "u.csv"}});
    assert_eq!(plap(d.path(), &["solve-singular"], &base).code, 0);
    let r = plap(
        d.path(),
        &["verify"],
        &json!({"problem": {"catalog": "manufactured-sin"}, "candidate": {"csv_path": "u.csv"}}),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(json_of(&r)["residual_sup"].as_f64().unwrap() < 1e-8);

    // bump v by 0.01 sin(5x)
    let (header, rows) = read_csv(&d.path().join("u.csv"));
    let mut text = header[..3].join(",") + "\n";
    for row in rows {
        let x: f64 = row[0].parse().unwrap();
        let v: f64 = row[1].parse::<f64>().unwrap() + 0.01 * (5.0 * x).sin();
        let s: f64 = row[2].parse::<f64>().unwrap() + 0.05 * (5.0 * x).cos();
        text += &format!("{x:e},{v:e},{s:e}\n");
    }
    std::fs::write(d.path().join("bad.csv"), text).unwrap();
    let r = plap(
        d.path(),
        &["verify"],
        &json!({"problem": {"catalog": "manufactured-sin"}, "candidate": {"csv_path": "bad.csv"}}),
    );
    assert_eq!(r.code, 2);
    assert!(json_of(&r)["residual_sup"].as_f64().unwrap() > 0.1);
}

#[test]
fn envelope_solve() {
    let d = tmp();
    let r = plap(
        d.path(),
        &["solve-f"],
        &json!({"problem": {"catalog": "manufactured-sin"},
                "envelope": {"formula": {"kind": "oscillating_power", "base": 2.0, "amp": 1.0, "omega": 1.0},
                             "c_f": 1.0, "C_f": 3.0, "gamma": 0.5}}),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(json_of(&r)["residual_sup"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solver_failure_is_not_an_input_error() {
    let d = tmp();
    let r = plap(d.path(), &["solve-singular"], &json!({"problem": {"catalog": "manufactured-sin2"}}));
    assert_eq!(r.code, 2);
    let rep = json_of(&r);
    assert_eq!(rep["status"], "failed");
    assert!(rep["error"].is_string());
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let cfg = RunConfig::from_value(json!({
        "problem": {"catalog": "plateau"},
        "solver": {"grid_n": 512},
        "sweep": {"gamma_grid": [0.25, 0.5], "p_grid": [2.0, 3.0], "parallel": 4}
    }))
    .unwrap();
    let one = sweep_rows(&cfg, 1).unwrap();
    let four = sweep_rows(&cfg, 4).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.len(), 4);
    assert!(one.windows(2).all(|w| (w[0].gamma, w[0].p) < (w[1].gamma, w[1].p)));
}

#[test]
fn sweep_writes_table() {
    let d = tmp();
    let r = plap(
        d.path(),
        &["sweep"],
        &json!({"problem": {"catalog": "rito-sine"},
                "solver": {"grid_n": 256},
                "sweep": {"gamma_grid": [0.1, 0.5], "p_grid": [1.5, 2.0, 3.0], "parallel": 2},
                "output": {"csv_path": "s.csv"}}),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = read_csv(&d.path().join("s.csv"));
    assert_eq!(header, ["gamma", "p", "verdict", "margin_ii", "converged", "residual"]);
    assert_eq!(rows.len(), 6);
    assert_eq!(json_of(&r)["rows"].as_array().unwrap().len(), 6);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use certilind_cli::commands::{parse_shapes, sweep_scenario};
use certilind_cli::model_file::Scenario;
use proptest::prelude::*;
use serde_json::Value;

fn certilind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certilind")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const DAMPED: &str = r#"
modes = 1
shape = { rect = [8] }
initial = { fock = [3] }

[[hamiltonian]]
op = "n0"

[[dissipators]]
op = "a0"

[solver]
t_final = 1.0
time_tol = 1e-12
"#;

#[test]
fn simulate_writes_a_certified_run() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "m.toml", DAMPED);
    let out = tmp.path().join("out");
    let o = certilind(&["simulate", &model, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["xi"].as_f64().unwrap() <= 1e-14);
    assert_eq!(s["dim"], 9);
    for f in ["trajectory.csv", "ledger.csv", "final_state.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,dim,trace_re,xi,defect_rate,accepted,resize\n"));
}

#[test]
fn tolerance_overrides_reach_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "m.toml", DAMPED);
    let out = tmp.path().join("out");
    let o = certilind(&["simulate", &model, "--out", out.to_str().unwrap(), "--space-tol", "3e-7", "--time-tol", "1e-9"]);
    assert!(o.status.success());
    let s = summary(&out);
    assert_eq!(s["space_tol"].as_f64(), Some(3e-7));
    assert_eq!(s["time_tol"].as_f64(), Some(1e-9));
}

#[test]
fn malformed_operator_names_the_token() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "m.toml", &DAMPED.replace("op = \"n0\"", "op = \"n0 + b0\""));
    let o = certilind(&["simulate", &model, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b0"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = DAMPED.replace("op = \"a0\"", "op = \"a0\"\nrate = 2.0");
    let o = certilind(&["simulate", &write(tmp.path(), "m.toml", &text), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = DAMPED.replace("time_tol = 1e-12", "time_tol = 1e-12\ntolerance = 1");
    let o = certilind(&["simulate", &write(tmp.path(), "n.toml", &text), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dimension_cap_is_a_certification_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
modes = 1
shape = { rect = [4] }
initial = { fock = [0] }

[[dissipators]]
op = "a0^2 - 4*id"

[solver]
t_final = 1.0
time_tol = 1e-10
adaptive_space = true
space_tol = 1e-12
max_dimension = 10
"#;
    let o = certilind(&["simulate", &write(tmp.path(), "m.toml", text), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write(tmp.path(), "m.toml", DAMPED);
    let (x, y) = (tmp.path().join("x"), tmp.path().join("y"));
    for d in [&x, &y] {
        assert!(certilind(&["simulate", &model, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["trajectory.csv", "ledger.csv", "final_state.json"] {
        assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f}");
    }
    let (mut sx, mut sy) = (summary(&x), summary(&y));
    sx["wall_time_s"] = Value::Null;
    sy["wall_time_s"] = Value::Null;
    assert_eq!(sx, sy);
}

#[test]
fn presets_are_listed_and_unknown_ones_rejected() {
    let o = certilind(&["reproduce", "--list"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["exampleA", "exampleB", "exampleC", "exampleD", "exampleE", "gkp", "adaptive1d", "adaptive2d"] {
        assert!(text.contains(name), "{name} not listed");
    }
    let tmp = tempfile::tempdir().unwrap();
    let o = certilind(&["reproduce", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn every_preset_parses() {
    for name in certilind_cli::presets::names() {
        let text = certilind_cli::commands::preset_model(name).unwrap();
        Scenario::from_toml(text, Path::new(".")).unwrap_or_else(|e| panic!("{name}: {e:#}"));
    }
}

#[test]
fn reproduce_example_a() {
    let tmp = tempfile::tempdir().unwrap();
    let o = certilind(&["reproduce", "exampleA", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&tmp.path().join("exampleA"));
    assert!(s["xi"].as_f64().unwrap() <= 1e-14);
}

#[test]
fn small_cat_sweep_respects_the_triangle_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
modes = 1
shape = { rect = [20] }
initial = { fock = [0] }

[[dissipators]]
op = "a0^2 - id"

[solver]
t_final = 1.0
time_tol = 1e-13
"#;
    let s = Scenario::from_toml(text, tmp.path()).unwrap();
    let shapes = parse_shapes("6..12,20", 1).unwrap();
    let pts = sweep_scenario(&s, &shapes, tmp.path(), 1).unwrap();
    assert_eq!(pts.len(), 8);
    let xi_ref = pts.last().unwrap().xi;
    for p in &pts {
        assert!(p.dist_to_ref <= p.xi + xi_ref + 1e-12, "{p:?}");
    }
    let csv = fs::read_to_string(tmp.path().join("error_vs_N.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("N0,dim,xi_T,dist_to_ref"));
}

fn scenario_text(n: usize, gamma: f64, omega: f64, tol: f64, fock: usize) -> String {
    format!(
        r#"
modes = 1
shape = {{ rect = [{n}] }}
initial = {{ fock = [{fock}] }}

[params]
g = {gamma}

[[hamiltonian]]
coeff = {omega}
op = "n0 + 0.5*(a0^2 + ad0^2)"

[[dissipators]]
op = "sqrt(g)*a0"

[solver]
t_final = 2.0
time_tol = {tol}
"#
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn scenarios_survive_a_round_trip(n in 2usize..30, gamma in 0.01f64..4.0, omega in -3.0f64..3.0, tol in 1e-14f64..1e-4, fock in 0usize..2) {
        let s = Scenario::from_toml(&scenario_text(n, gamma, omega, tol, fock), Path::new(".")).unwrap();
        let text = s.to_file().to_toml().unwrap();
        let back = Scenario::from_toml(&text, Path::new(".")).unwrap();
        prop_assert_eq!(back, s);
    }
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use sddhopf::cli::*;
use sddhopf::error::Error;
use serde_json::{json, Value};

fn recipe(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(format!("{name}.json"))
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(recipe(name)).unwrap()).unwrap()
}

fn sddhopf(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sddhopf"));
    cmd.args(args).env_remove("SDDHOPF_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run(args: &[&str]) -> Output {
    sddhopf(args, &[])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn with_config(cfg: &Value, f: impl FnOnce(&str) -> Output) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    f(p.to_str().unwrap())
}

fn json_of<T: serde::de::DeserializeOwned + serde::Serialize>(o: &Output) -> T {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(o);
    let v: T = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    // strict types: every field is known and nothing is dropped
    let back: Value = serde_json::to_value(&v).unwrap();
    assert_eq!(back, serde_json::from_str::<Value>(&text).unwrap());
    v
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn equilibrium_of_the_reference_model() {
    let r: EquilibriumReport = json_of(&run(&["equilibrium", "--config", recipe("hes1").to_str().unwrap(), "--format", "json"]));
    assert!(rel(r.r_star, 11.97050076) < 1e-7);
    assert!(rel(r.xi_star, 2992.625189) < 1e-7);
    assert!(rel(r.f_derivatives[0], -0.00059384374) < 1e-7);
    assert!(rel(r.g_derivatives[0], 10.0) < 1e-7);
}

#[test]
fn zero_feedback_has_the_origin_as_steady_state() {
    let r: EquilibriumReport = json_of(&run(&["equilibrium", "--config", recipe("zero").to_str().unwrap(), "--format", "json"]));
    assert_eq!((r.r_star, r.xi_star), (0.0, 0.0));
}

#[test]
fn malformed_configs_exit_with_the_config_code() {
    let bad = with_config(&json!("not a config"), |p| run(&["equilibrium", "--config", p]));
    assert_eq!(bad.status.code(), Some(EXIT_CONFIG));
    let mut cfg = load("hes1");
    cfg["model"]["unknown_field"] = json!(1.0);
    let unknown = with_config(&cfg, |p| run(&["equilibrium", "--config", p]));
    assert_eq!(unknown.status.code(), Some(EXIT_CONFIG));
    let missing = run(&["equilibrium", "--config", "/nonexistent/run.json"]);
    assert_eq!(missing.status.code(), Some(EXIT_CONFIG));
    let no_config = run(&["stability"]);
    assert_eq!(no_config.status.code(), Some(EXIT_CONFIG));
    let bad_flag = run(&["stability", "--config", recipe("hes1").to_str().unwrap(), "--eps", "abc"]);
    assert_eq!(bad_flag.status.code(), Some(EXIT_CONFIG));
    let negative_delay = run(&["stability", "--config", recipe("hes1").to_str().unwrap(), "--eps", "-1"]);
    assert_eq!(negative_delay.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn weak_coupling_is_reported_stable_for_all_delays() {
    let o = run(&["stability", "--config", recipe("stable_for_all").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("StableForAllEps"), "{}", stdout(&o));
    let r: StabilityReport = json_of(&run(&["stability", "--config", recipe("stable_for_all").to_str().unwrap(), "--format", "json"]));
    assert!(r.hopf.is_none());
}

#[test]
fn further_critical_delays_are_roots_of_the_characteristic_function() {
    let r: StabilityReport = json_of(&run(&["stability", "--config", recipe("hes1").to_str().unwrap(), "--eps-k", "3", "--format", "json"]));
    assert_eq!(r.eps_k.len(), 3);
    let h = r.hopf.unwrap();
    for e in &r.eps_k {
        assert!(e.char_residual < 1e-8, "{e:?}");
        assert!(e.eps > h.eps0);
    }
    let csv = stdout(&run(&["stability", "--config", recipe("hes1").to_str().unwrap(), "--eps-k", "3", "--format", "csv"]));
    assert_eq!(csv.lines().next(), Some("k,eps,beta,char_residual"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn direction_depends_on_c() {
    let nf = |c: &str| -> NormalFormReport { json_of(&run(&["normal-form", "--config", recipe("hes1").to_str().unwrap(), "--c", c, "--format", "json"])) };
    let sup = nf("0.01");
    assert_eq!(format!("{:?}", sup.direction), "Supercritical");
    assert!(sup.kappa3.re < 0.0);
    let sub = nf("0.025");
    assert_eq!(format!("{:?}", sub.direction), "Subcritical");
    assert!(sub.kappa3.re > 0.0);
    let c0 = sup.c0.unwrap();
    assert!(0.01 < c0 && c0 < 0.025);
    let text = stdout(&run(&["normal-form", "--config", recipe("hes1").to_str().unwrap(), "--c", "0.025"]));
    assert!(text.contains("Subcritical"), "{text}");
}

fn csv_rows(text: &str) -> (String, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn trajectory_csv_layout() {
    for (system, header) in [("original", "t,x,y,tau"), ("transformed", "eta,r,xi,k")] {
        let o = run(&["simulate", "--config", recipe("fig2a").to_str().unwrap(), "--system", system, "--t-end", "50", "--format", "csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let (h, rows) = csv_rows(&text);
        assert_eq!(h, header);
        assert!(rows.len() > 10);
        assert!(rows.iter().all(|r| r.len() == 4));
        // fixed scientific notation with 16 digits
        let first = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
        assert!(first.contains('e') && first.split('e').next().unwrap().len() == 18, "{first}");
        assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    }
}

#[test]
fn output_path_receives_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = run(&["simulate", "--config", recipe("fig2a").to_str().unwrap(), "--t-end", "20", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("status"));
    let (h, _) = csv_rows(&std::fs::read_to_string(out).unwrap());
    assert_eq!(h, "eta,r,xi,k");
}

#[test]
fn equilibrium_start_gives_a_constant_trajectory() {
    let mut cfg = load("fig2b");
    cfg["analysis"]["simulate"]["initial"] = json!({"kind": "constant"});
    for system in ["original", "transformed"] {
        let o = with_config(&cfg, |p| run(&["simulate", "--config", p, "--system", system, "--t-end", "200", "--format", "csv"]));
        assert_eq!(o.status.code(), Some(0));
        let (_, rows) = csv_rows(&stdout(&o));
        let r0 = &rows[0];
        for r in &rows {
            assert!(rel(r[1], r0[1]) < 1e-12 && rel(r[2], r0[2]) < 1e-12 && rel(r[3], r0[3]) < 1e-12, "{r:?} vs {r0:?}");
        }
    }
}

#[test]
fn escape_ends_the_run_with_the_integration_code() {
    let mut cfg = load("fig2b");
    cfg["analysis"]["simulate"]["solver"] = json!({"escape_factor": 1e-4});
    let o = with_config(&cfg, |p| run(&["simulate", "--config", p, "--format", "json"]));
    assert_eq!(o.status.code(), Some(EXIT_INTEGRATION));
    let r: SimulateReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(matches!(r.status, sddhopf::dde::Status::Escaped { .. }), "{:?}", r.status);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("status: Escaped"), "{err}");
}

#[test]
fn every_command_emits_strict_json() {
    let hes1 = recipe("hes1");
    let h = hes1.to_str().unwrap();
    let _: EquilibriumReport = json_of(&run(&["equilibrium", "--config", h, "--format", "json"]));
    let _: StabilityReport = json_of(&run(&["stability", "--config", h, "--format", "json"]));
    let _: NormalFormReport = json_of(&run(&["normal-form", "--config", h, "--format", "json"]));
    let _: SimulateReport = json_of(&run(&["simulate", "--config", recipe("fig2b").to_str().unwrap(), "--format", "json"]));
    let _: SweepReport = json_of(&run(&["sweep", "--config", recipe("sweep").to_str().unwrap(), "--format", "json"]));
}

fn sweep_json(cfg: &Value, env: &[(&str, &str)]) -> (Option<i32>, String) {
    let o = with_config(cfg, |p| sddhopf(&["sweep", "--config", p, "--format", "json"], env));
    (o.status.code(), stdout(&o))
}

#[test]
fn sweep_straddling_the_critical_point_has_four_regimes() {
    let (code, text) = sweep_json(&load("sweep"), &[]);
    assert_eq!(code, Some(0));
    let r: SweepReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.cells.len(), 4);
    let labels: std::collections::BTreeSet<_> = r.cells.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels.len(), 4, "{labels:?}");
    for cell in &r.cells {
        let below = cell.values[0] < 0.0;
        let sub = cell.values[1] > 0.0;
        assert_eq!(cell.sim, if below { SimClass::Stable } else { SimClass::Oscillating }, "{cell:?}");
        let side = if below { "below" } else { "above" };
        let dir = if sub { "subcritical" } else { "supercritical" };
        assert_eq!(cell.analytic, format!("{side}-{dir}"));

        // each cell agrees with a separate simulate run at the same parameters
        let eps = cell.eps.unwrap().to_string();
        let c = cell.c.unwrap().to_string();
        let single: SimulateReport = json_of(&run(&["simulate", "--config", recipe("sweep").to_str().unwrap(), "--eps", &eps, "--c", &c, "--format", "json"]));
        assert_eq!(single.oscillation.map(|o| o.decay_rate), cell.decay_rate);
        assert_eq!(classify_run(&single, r.decay_tol), cell.sim);
    }
}

#[test]
fn single_cell_sweep_equals_simulate() {
    let mut cfg = load("sweep");
    cfg["analysis"]["sweep"]["axes"] = json!([
        {"param": "eps", "values": [0.1], "relative_to_critical": true},
        {"param": "c", "values": [0.01]}
    ]);
    let (code, text) = sweep_json(&cfg, &[]);
    assert_eq!(code, Some(0));
    let r: SweepReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.cells.len(), 1);
    let fig2b: SimulateReport = json_of(&run(&["simulate", "--config", recipe("fig2b").to_str().unwrap(), "--format", "json"]));
    let cell = &r.cells[0];
    assert_eq!(cell.decay_rate, fig2b.oscillation.map(|o| o.decay_rate));
    assert_eq!(cell.amplitude, fig2b.oscillation.map(|o| o.amplitude));
    assert_eq!(cell.eps, Some(fig2b.eps));
}

#[test]
fn constant_delay_row_is_stable_below_the_critical_delay() {
    let mut cfg = load("sweep");
    cfg["analysis"]["sweep"]["axes"] = json!([
        {"param": "c", "values": [0.0]},
        {"param": "eps", "values": [-2.0, -0.5, -0.1], "relative_to_critical": true}
    ]);
    let (code, text) = sweep_json(&cfg, &[]);
    assert_eq!(code, Some(0));
    let r: SweepReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.cells.len(), 3);
    for cell in &r.cells {
        assert_eq!(cell.sim, SimClass::Stable, "{cell:?}");
        assert!(cell.analytic.starts_with("below"));
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let cfg = load("sweep");
    let (c1, one) = sweep_json(&cfg, &[("SDDHOPF_THREADS", "1")]);
    let (c4, four) = sweep_json(&cfg, &[("SDDHOPF_THREADS", "4")]);
    let (c0, default) = sweep_json(&cfg, &[]);
    assert_eq!((c1, c4, c0), (Some(0), Some(0), Some(0)));
    assert_eq!(one, four);
    assert_eq!(one, default);
    for bad in ["0", "many"] {
        let (code, _) = sweep_json(&cfg, &[("SDDHOPF_THREADS", bad)]);
        assert_eq!(code, Some(EXIT_CONFIG), "SDDHOPF_THREADS={bad}");
    }
}

#[test]
fn sweep_text_is_a_label_matrix() {
    let o = run(&["sweep", "--config", recipe("sweep").to_str().unwrap()]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.contains('/')).collect();
    assert_eq!(rows.len(), 2, "{text}");
    let csv = stdout(&run(&["sweep", "--config", recipe("sweep").to_str().unwrap(), "--format", "csv"]));
    assert!(csv.starts_with("i,j,eps,c,eps,c,sim,analytic,label,decay_rate,amplitude,period,error\n"), "{csv}");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn output_is_deterministic() {
    let path = recipe("fig3a");
    let args = ["simulate", "--config", path.to_str().unwrap(), "--format", "csv"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn errors_map_to_documented_exit_codes() {
    assert_eq!(exit_code(&Error::Config("x".into())), 1);
    assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 1);
    assert_eq!(exit_code(&Error::NoConvergence { residual: 1.0, iterations: 3 }), 2);
    assert_eq!(exit_code(&Error::ResonanceViolation { value: Complex64::new(0.0, 0.0) }), 3);
    assert_eq!(exit_code(&Error::LagInsideStep), 4);
    assert_eq!((EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_RESONANCE, EXIT_INTEGRATION), (0, 1, 2, 3, 4));
}

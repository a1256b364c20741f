use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgfem"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Nodal values from a solution CSV, skipping the hash and header lines.
fn csv_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn check_mesh_square_satisfies_xz() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "mesh.levels = 3\n");
    let o = run(&["check-mesh", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["xz_satisfied"], true);
    assert_eq!(v["stabilization"], "xz");
    assert_eq!(v["level"], 3);
}

#[test]
fn check_mesh_rhombus_reports_acute_angle() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "stabilization = \"acute\"\nmesh.family = \"acute_rhombus\"\nmesh.levels = 3\n",
    );
    let o = run(&["check-mesh", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let theta = stdout_json(&o)["acute_theta"].as_f64().unwrap();
    assert!((theta - std::f64::consts::FRAC_PI_6).abs() < 1e-12, "{theta}");
}

#[test]
fn check_mesh_acute_on_square_fails() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "stabilization = \"acute\"\nmesh.levels = 3\n");
    let o = run(&["check-mesh", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["condition_satisfied"], false);
}

#[test]
fn check_mesh_reads_mesh_files_relative_to_config() {
    let tmp = TempDir::new().unwrap();
    let sub = tmp.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    let mesh = mfg_core::mesh::generate_structured_square(2).unwrap();
    mfg_core::mesh::write_mesh(&mesh, sub.join("square.mesh")).unwrap();
    let cfg = write_config(&sub, "c.toml", "mesh.family = \"file:square.mesh\"\nmesh.levels = 1\nproblem.kind = \"nonneg_density\"\n");
    let o = run(&["check-mesh", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["num_triangles"], 32);
}

#[test]
fn malformed_inputs_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        "mesh.levels = [",
        "mesh.famly = \"xz_square\"",
        "stabilization = \"none\"",
        "command = \"verify\"",
        "mesh.family = \"file:missing.mesh\"",
        "solver.damping = 1.5",
        "problem.kind = \"custom\"",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.toml"), text);
        let o = run(&["solve", cfg.to_str().unwrap()], tmp.path());
        assert_eq!(code(&o), 2, "{text}");
    }
    let o = run(&["solve", "does-not-exist.toml"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_zero_data_gives_zero_solution() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "problem.kind = \"zero\"\nmesh.levels = 3\n");
    let o = run(&["solve", cfg.to_str().unwrap(), "--out", "z"], tmp.path());
    assert_eq!(code(&o), 0);
    for f in ["solution_u.csv", "solution_m.csv"] {
        let vals = csv_values(&tmp.path().join("z").join(f));
        assert_eq!(vals.len(), 289);
        assert!(vals.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn solve_default_sine_converges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "mesh.levels = 4\noutput.dir = \"s\"\n");
    let o = run(&["solve", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let t = read_json(&tmp.path().join("s/telemetry.json"));
    assert_eq!(t["converged"], true);
    assert!(t["residual1_dual"].as_f64().unwrap() <= 1e-9);
    assert!(t["residual2_dual"].as_f64().unwrap() <= 1e-9);
    let hash = t["config_hash"].as_str().unwrap();
    let text = std::fs::read_to_string(tmp.path().join("s/solution_u.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash}"));
    let raw = std::fs::read_to_string(tmp.path().join("s/telemetry.json")).unwrap();
    assert!(raw.trim_start().starts_with("{\n  \"config_hash\""));
}

#[test]
fn solve_forced_nonconvergence_exits_3_with_history() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "mesh.levels = 3\nsolver.max_outer = 1\n");
    let o = run(&["solve", cfg.to_str().unwrap(), "--out", "n"], tmp.path());
    assert_eq!(code(&o), 3);
    let t = read_json(&tmp.path().join("n/telemetry.json"));
    assert_eq!(t["converged"], false);
    assert_eq!(t["residual_history"].as_array().unwrap().len(), 1);
    assert!(!tmp.path().join("n/solution_u.csv").exists());
}

#[test]
fn solve_outputs_are_bit_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "mesh.levels = 3\nseed = 9\n");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["solve", c, "--out", "a"], tmp.path())), 0);
    assert_eq!(code(&run(&["solve", c, "--out", "b"], tmp.path())), 0);
    for f in ["solution_u.csv", "solution_m.csv", "telemetry.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn convergence_needs_three_levels() {
    let tmp = TempDir::new().unwrap();
    for levels in ["2", "[2, 3]"] {
        let cfg = write_config(tmp.path(), "c.toml", &format!("mesh.levels = {levels}\n"));
        let o = run(&["convergence", cfg.to_str().unwrap()], tmp.path());
        assert_eq!(code(&o), 2, "{levels}");
    }
}

#[test]
fn convergence_rough_instance_reports_reference_verdicts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "problem.kind = \"rough_density\"\nmesh.levels = [1, 2, 3]\n",
    );
    let o = run(&["convergence", cfg.to_str().unwrap(), "--out", "r"], tmp.path());
    assert!(matches!(code(&o), 0 | 1));
    let report = read_json(&tmp.path().join("r/report.json"));
    assert_eq!(report["protocol"], "reference");
    let names: Vec<&str> = report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["eoc_u_H1", "eoc_m_L2", "eoc_u_H1_minus_eoc_m_H1"]);
    let csv = std::fs::read_to_string(tmp.path().join("r/eoc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(report["pass"].as_bool().unwrap(), code(&o) == 0);
}

#[test]
fn convergence_nonneg_density_checks_positivity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "problem.kind = \"nonneg_density\"\nmesh.family = \"acute_rhombus\"\nmesh.levels = [1, 2, 3]\n",
    );
    let o = run(&["convergence", cfg.to_str().unwrap(), "--out", "p"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&tmp.path().join("p/report.json"));
    let verdicts = report["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 3);
    assert!(verdicts.iter().all(|v| v["pass"] == true));
}

#[test]
fn verify_defaults_pass() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["verify", "--out", "v"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&tmp.path().join("v/report.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["suites"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_rejects_small_omega_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "stabilization = \"xz\"\nomega_factor = 0.1\n");
    let o = run(&["verify", cfg.to_str().unwrap(), "--out", "v"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("v/report.json").exists());
}

#[test]
fn verify_verdicts_do_not_depend_on_seed() {
    let tmp = TempDir::new().unwrap();
    let verdicts = |seed: u64| {
        let cfg = write_config(tmp.path(), &format!("s{seed}.toml"), &format!("seed = {seed}\nverify.level = 3\n"));
        let out = format!("v{seed}");
        let o = run(&["verify", cfg.to_str().unwrap(), "--out", &out], tmp.path());
        let report = read_json(&tmp.path().join(out).join("report.json"));
        let suites: Vec<(String, bool)> = report["suites"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| (s["name"].as_str().unwrap().to_string(), s["pass"].as_bool().unwrap()))
            .collect();
        (code(&o), suites)
    };
    assert_eq!(verdicts(1), verdicts(2));
}

#[test]
fn unstabilized_runs_need_the_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "stabilization = \"none\"\nmesh.levels = 3\n");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["solve", c], tmp.path())), 2);
    let o = run(&["solve", c, "--allow-unstabilized", "--out", "u"], tmp.path());
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&tmp.path().join("u/telemetry.json"))["stabilization"], "none");
}

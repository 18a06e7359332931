use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sgbh_core::noise::ControlPath;

fn sgbh(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sgbh"))
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"
[noise]
n_modes = 8
[solver]
t_end = 0.05
n_modes = 8
n_points = 64
"#;

const LINEAR: &str = r#"
[model]
alpha = 0.0
beta = 0.0
[noise]
n_modes = 8
coefficient = "constant"
[solver]
t_end = 0.05
n_modes = 8
n_points = 32
initial = []
"#;

#[test]
fn deterministic_zero_data_gives_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}initial = []\n");
    let o = sgbh(dir.path(), &cfg, &["--out", "det", "simulate", "--solver", "deterministic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("det/norms.csv")).unwrap();
    let mut lines = csv.lines();
    lines.next();
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[1..].iter().all(|&v| v == 0.0), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 51);
}

#[test]
fn spde_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = sgbh(dir.path(), SMALL, &["--seed", "7", "--out", out, "simulate", "--solver", "spde"]);
        assert_eq!(code(&o), 0);
    }
    let a = fs::read(dir.path().join("a/trajectory.bin")).unwrap();
    let b = fs::read(dir.path().join("b/trajectory.bin")).unwrap();
    assert_eq!(a, b);
    let o = sgbh(dir.path(), SMALL, &["--seed", "8", "--out", "c", "simulate"]);
    assert_eq!(code(&o), 0);
    assert_ne!(a, fs::read(dir.path().join("c/trajectory.bin")).unwrap());
}

#[test]
fn resolved_config_is_written_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgbh(dir.path(), SMALL, &["--seed", "42", "--out", "r", "simulate", "--solver", "deterministic"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("r/config.toml")).unwrap();
    assert!(text.contains("seed = 42"));
    let again = sgbh(dir.path(), &text, &["--out", "r2", "simulate", "--solver", "deterministic"]);
    assert_eq!(code(&again), 0);
    let second = fs::read_to_string(dir.path().join("r2/config.toml")).unwrap();
    assert_eq!(second, text.replace("out = \"r\"", "out = \"r2\""));
}

#[test]
fn skeleton_with_zero_control_stays_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    ControlPath::zeros(8, 1e-3, 50).save(&dir.path().join("zero.bin")).unwrap();
    let o = sgbh(
        dir.path(),
        SMALL,
        &["--out", "sk", "simulate", "--solver", "skeleton", "--control", "zero.bin"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let traj = sgbh_core::solvers::Trajectory::load_binary(&dir.path().join("sk/trajectory.bin")).unwrap();
    assert!(traj.all_coeffs().iter().all(|&v| v == 0.0));

    let missing = sgbh(dir.path(), SMALL, &["simulate", "--solver", "skeleton"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgbh(dir.path(), "[model]\ngama = 0.4\n", &["simulate"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gama") && err.contains("line 2"), "{err}");

    let o = sgbh(dir.path(), "[model]\nnu = -1.0\n", &["simulate"]);
    assert_eq!(code(&o), 2);
    let o = sgbh(dir.path(), SMALL, &["experiment", "bogus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn blowup_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("n_points = 64", "n_points = 64\nblowup_threshold = 1e-3");
    let o = sgbh(dir.path(), &cfg, &["simulate", "--solver", "deterministic"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn heat_oracle_passes_and_tiny_ensembles_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{LINEAR}[experiment]\nn_paths = 1000\neps_list = [1.0]\n");
    let o = sgbh(dir.path(), &cfg, &["--out", "ok", "experiment", "heat-oracle"]);
    assert_eq!(code(&o), 0);
    let report = json(dir.path().join("ok/heat_oracle.json"));
    assert!(report["fraction_within_3"].as_f64().unwrap() >= 0.95);
    assert!(dir.path().join("ok/heat_oracle.csv").exists());

    let cfg = format!("{LINEAR}[experiment]\nn_paths = 2\neps_list = [1.0]\n");
    let o = sgbh(dir.path(), &cfg, &["--seed", "3", "--out", "tiny", "experiment", "heat-oracle"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(dir.path().join("tiny/heat_oracle.json"))["pass"], Value::Bool(false));
}

#[test]
fn linear_prop31_preset_recovers_exact_slope() {
    let dir = tempfile::tempdir().unwrap();
    let preset = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/linear_prop31.toml")).unwrap();
    let cfg = preset.replace("n_paths = 100", "n_paths = 10");
    let o = sgbh(dir.path(), &cfg, &["--out", "p", "experiment", "prop31"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("p/prop31.json"));
    let slope = report["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 4.0).abs() < 1e-9, "{slope}");
    assert_eq!(report["pass"], Value::Bool(true));
    let csv = fs::read_to_string(dir.path().join("p/prop31.csv")).unwrap();
    assert!(csv.starts_with("eps,mean,stderr,n_rejected\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn degenerate_clt_has_undecided_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[experiment]\nn_paths = 1\neps_list = [0.01]\n");
    let o = sgbh(dir.path(), &cfg, &["--out", "c", "experiment", "clt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("c/clt.json"));
    assert_eq!(report["pass"], Value::Null);
    assert_eq!(report["checks"][0]["pass"], Value::Null);
}

#[test]
fn worker_count_does_not_change_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[experiment]\nn_paths = 12\neps_list = [0.1, 0.01]\n");
    for (w, out) in [("1", "w1"), ("3", "w3")] {
        let o = sgbh(dir.path(), &cfg, &["--workers", w, "--out", out, "experiment", "mdp-tail"]);
        assert_eq!(code(&o), 0);
    }
    for f in ["mdp_tail.json", "mdp_tail.csv"] {
        assert_eq!(
            fs::read(dir.path().join("w1").join(f)).unwrap(),
            fs::read(dir.path().join("w3").join(f)).unwrap()
        );
    }
}

#[test]
fn rate_function_of_saved_skeleton_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut hdot = vec![0.0; 8 * 50];
    for (i, v) in hdot.iter_mut().enumerate() {
        *v = ((i * 37 % 11) as f64 - 5.0) * 0.3;
    }
    let h = ControlPath::new(8, 1e-3, 50, hdot).unwrap();
    h.save(&root.join("h.bin")).unwrap();
    let o = sgbh(root, SMALL, &["--out", "sk", "simulate", "--solver", "skeleton", "--control", "h.bin"]);
    assert_eq!(code(&o), 0);

    let o = sgbh(root, SMALL, &["--out", "r1", "rate", "--target", "sk/trajectory.bin"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r1 = json(root.join("r1/rate.json"));
    let value = r1["value"].as_f64().unwrap();
    assert!(value <= h.action() + 1e-8);
    assert!(value > 0.0);
    assert_eq!(r1["converged"], Value::Bool(true));
    assert_eq!(r1["control_file"], "control.bin");
    assert!(ControlPath::load(&root.join("r1/control.bin")).is_ok());

    let traj = sgbh_core::solvers::Trajectory::load_binary(&root.join("sk/trajectory.bin")).unwrap();
    let doubled: Vec<f64> = traj.final_coeffs().iter().map(|v| 2.0 * v).collect();
    let field = sgbh_core::spectral::Field::Spectral(doubled);
    fs::write(root.join("double.json"), serde_json::to_string(&field).unwrap()).unwrap();
    let o = sgbh(root, SMALL, &["--out", "r2", "rate", "--target", "double.json"]);
    assert_eq!(code(&o), 0);
    let v2 = json(root.join("r2/rate.json"))["value"].as_f64().unwrap();
    assert!((v2 - 4.0 * value).abs() <= 1e-6 * v2);

    let zero = sgbh_core::spectral::Field::Spectral(vec![0.0; 8]);
    fs::write(root.join("zero.json"), serde_json::to_string(&zero).unwrap()).unwrap();
    let o = sgbh(root, SMALL, &["--out", "r0", "rate", "--target", "zero.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(root.join("r0/rate.json"))["value"].as_f64().unwrap(), 0.0);

    fs::write(root.join("junk.json"), "{").unwrap();
    let o = sgbh(root, SMALL, &["rate", "--target", "junk.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn kernel_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgbh(dir.path(), "[solver]\nn_points = 63\n", &["--out", "k", "validate-kernel"]);
    assert_eq!(code(&o), 0);
    let report = json(dir.path().join("k/kernel_estimates.json"));
    assert_eq!(report["fits"].as_array().unwrap().len(), 3);
    assert!(report["images_vs_eigen_max_diff"].as_f64().unwrap() < 1e-8);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn reachkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachkit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn volume_of_double_integrator() {
    let cfg = fixture("double_integrator.json");
    let o = reachkit(&["volume", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["volume_Z"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-3, "{v}");
    assert!((v["det_M"].as_f64().unwrap().abs() - 1.0).abs() < 1e-12);
}

#[test]
fn canonical_prints_transform() {
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["canonical", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["M", "M_inv", "c", "eigenvalues", "det_M"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn envelope_csv_has_one_row_per_knot() {
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["envelope", "--config", cfg.to_str().unwrap(), "--dt", "0.05"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("s,u_min,u_max,mu,nu"));
    assert_eq!(lines.count(), 61);
}

#[test]
fn validate_without_samples_passes() {
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["validate", "--config", cfg.to_str().unwrap(), "--samples", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"], 0);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn validate_small_run_passes() {
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["validate", "--config", cfg.to_str().unwrap(), "--samples", "60", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn boundary_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["boundary", "--config", cfg.to_str().unwrap(), "--grid", "40", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert!(csv.starts_with("t,side,sigma_1,x_1,x_2,z_1,z_2\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 40);
    let svg = std::fs::read_to_string(dir.path().join("boundary.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<path"));
}

#[test]
fn boundary_svg_on_stdout() {
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["boundary", "--config", cfg.to_str().unwrap(), "--grid", "20", "--format", "svg"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("<svg"));
}

#[test]
fn svg_needs_a_planar_system() {
    let cfg = fixture("damped_three_state.json");
    let o = reachkit(&["boundary", "--config", cfg.to_str().unwrap(), "--grid", "10", "--format", "svg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn demo_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("planar_oscillator.json");
    let o = reachkit(&["demo", "--config", cfg.to_str().unwrap(), "--grid", "40", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["demo_boundary.csv", "demo_volume.json", "demo_boundary.svg"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo_volume.json")).unwrap()).unwrap();
    let vols: Vec<f64> = v["volumes"].as_array().unwrap().iter().map(|r| r["volume_Z"].as_f64().unwrap()).collect();
    assert_eq!(vols.len(), 5);
    assert!(vols.windows(2).all(|w| w[0] < w[1]), "{vols:?}");
    let svg = std::fs::read_to_string(dir.path().join("demo_boundary.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 5);
}

#[test]
fn output_is_deterministic() {
    let cfg = fixture("damped_three_state.json");
    let args = ["boundary", "--config", cfg.to_str().unwrap(), "--grid", "12", "--format", "json"];
    let a = reachkit(&args);
    let b = reachkit(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let args = ["validate", "--config", cfg.to_str().unwrap(), "--samples", "30", "--seed", "4"];
    assert_eq!(reachkit(&args).stdout, reachkit(&args).stdout);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"system": {"A": [0.0, 1.0, 0.0], "b": [0.0, 1.0], "v_min": -1.0, "v_max": 1.0, "z0": [0.0, 0.0], "t_final": 1.0}}"#,
    );
    let o = reachkit(&["volume", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error["));

    let cfg = write_config(dir.path(), "garbage.json", "{ not json");
    assert_eq!(reachkit(&["volume", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn repeated_eigenvalues_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "jordan.json",
        r#"{"system": {"A": [1.0, 1.0, 0.0, 1.0], "b": [0.0, 1.0], "v_min": -1.0, "v_max": 1.0, "z0": [0.0, 0.0], "t_final": 1.0}}"#,
    );
    let o = reachkit(&["canonical", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn uncontrollable_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "diag.json",
        r#"{"system": {"A": [1.0, 0.0, 0.0, 2.0], "b": [1.0, 0.0], "v_min": -1.0, "v_max": 1.0, "z0": [0.0, 0.0], "t_final": 1.0}}"#,
    );
    assert_eq!(reachkit(&["canonical", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn missing_config_file_is_io_error() {
    let o = reachkit(&["volume", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(1));
}

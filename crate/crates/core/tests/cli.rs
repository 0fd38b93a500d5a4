use std::path::Path;
use std::process::{Command, Output};

fn ftc_sim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftc-sim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn ftc-sim")
}

fn write_short_preset(dir: &Path, scenario: &str, controller: &str, duration: f64) -> String {
    let out = ftc_sim(&["preset", "--scenario", scenario, "--controller", controller], dir);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("schema_version = 1"));
    let text: String = text
        .lines()
        .map(|l| {
            if l.starts_with("duration") {
                format!("duration = {duration}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_short_preset(dir.path(), "2", "pid", 3.0);
    let out = ftc_sim(&["run", "--config", &cfg, "--seed", "4", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("res/scenario2_pid_seed4.csv");
    assert!(csv.exists());
    assert!(dir.path().join("res/scenario2_pid_seed4.summary.toml").exists());

    let out = ftc_sim(&["plot", csv.to_str().unwrap(), "--out", "fig"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["controls", "airspeed", "v_d", "height", "fault"] {
        assert!(dir.path().join(format!("fig/scenario2_pid_seed4_{name}.svg")).exists());
    }
}

#[test]
fn batch_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_short_preset(dir.path(), "1", "pid", 1.0);
    let out = ftc_sim(
        &["run", "--config", &cfg, "--seed", "10", "--batch", "3", "--out", "."],
        dir.path(),
    );
    assert!(out.status.success());
    for seed in 10..13 {
        assert!(dir.path().join(format!("scenario1_pid_seed{seed}.csv")).exists());
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = ftc_sim(&["run", "--scenario", "4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ftc_sim(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_short_preset(dir.path(), "1", "pid", 1.0);
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("schema_version = 1", "schema_version = 0");
    std::fs::write(&cfg, text).unwrap();
    let out = ftc_sim(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn validate_reports_both_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let out = ftc_sim(&["validate", "--duration", "2", "--out", "v"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pid_rms_altitude_error"));
    assert!(text.contains("nmpc_rms_altitude_error"));
    assert!(dir.path().join("v/validate_pid.csv").exists());
}

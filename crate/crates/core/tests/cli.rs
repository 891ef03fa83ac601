//! End-to-end tests of the command-line interface: exit codes, error
//! prefixes, output formats, and the documented table schemas.

use std::path::{Path, PathBuf};
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    run_with_env(args, &[])
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_photondist"));
    cmd.args(args).env_remove("PHOTONDIST_THREADS");
    for (key, value) in env {
        cmd.env(key, value);
    }
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    )
}

/// Value of a `# key=value` comment line in CSV output.
fn comment_value(output: &str, key: &str) -> String {
    let prefix = format!("# {}=", key);
    output
        .lines()
        .find_map(|line| line.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no comment {:?} in output:\n{}", key, output))
        .to_string()
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn make_state(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let path_str = path.to_str().unwrap().to_string();
    let mut full: Vec<&str> = vec!["state", "--output", &path_str, "--make"];
    full.extend_from_slice(args);
    let (code, _, stderr) = run(&full);
    assert_eq!(code, 0, "state --make failed: {}", stderr);
    path
}

#[test]
fn made_states_validate_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        make_state(dir.path(), "vacuum.json", &["vacuum", "--modes", "2"]),
        make_state(
            dir.path(),
            "coherent.json",
            &["coherent", "--alpha-re", "0.7", "--alpha-im", "-0.3"],
        ),
        make_state(dir.path(), "thermal.json", &["thermal", "--nbar", "1.5"]),
        make_state(
            dir.path(),
            "squeezed.json",
            &["squeezed", "--r", "0.8", "--phi", "0.4"],
        ),
    ];
    for file in &files {
        let (code, stdout, stderr) = run(&["state", file.to_str().unwrap()]);
        assert_eq!(code, 0, "{}: {}", file.display(), stderr);
        assert!(stdout.contains("physical,true"), "{}", stdout);
        assert!(stdout.starts_with("field,value\n"));
    }
}

#[test]
fn pnd_on_vacuum_is_a_single_unit_row() {
    let dir = tempfile::tempdir().unwrap();
    let vacuum = make_state(dir.path(), "vacuum.json", &["vacuum"]);
    let (code, stdout, _) = run(&["pnd", vacuum.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(comment_value(&stdout, "cutoff"), "0");
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("n1"))
        .collect();
    assert_eq!(rows, vec!["0,1.0000000000000000e0"]);
}

#[test]
fn verify_thermal_state_agrees_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let thermal = make_state(dir.path(), "thermal.json", &["thermal", "--nbar", "1.0"]);
    let (code, stdout, stderr) = run(&["verify", thermal.to_str().unwrap(), "--cutoff", "20"]);
    assert_eq!(code, 0, "{}", stderr);
    let max_dev: f64 = comment_value(&stdout, "max_abs_deviation").parse().unwrap();
    assert!(max_dev <= 1e-8, "max deviation {}", max_dev);
    assert!(stdout.contains("n1,pnd,oracle,abs_deviation"));
}

#[test]
fn qplanck_zero_deformation_reproduces_planck() {
    let (code, stdout, _) = run(&["qplanck", "--lambda", "0", "--x", "1"]);
    assert_eq!(code, 0);
    let row = stdout.lines().last().unwrap();
    let fields: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
    let planck = 1.0 / (std::f64::consts::E - 1.0);
    assert_eq!(fields.len(), 4);
    assert!((fields[0] - 1.0).abs() < 1e-15);
    assert!((fields[1] - planck).abs() < 1e-12, "exact {}", fields[1]);
    assert!((fields[2] - planck).abs() < 1e-12, "approx {}", fields[2]);
    assert_eq!(fields[3], 0.0);
}

#[test]
fn qplanck_range_is_inclusive_and_ordered() {
    let (code, stdout, _) = run(&[
        "qplanck", "--lambda", "0.1", "--x-min", "0.5", "--x-max", "2.5", "--x-steps", "5",
    ]);
    assert_eq!(code, 0);
    let xs: Vec<f64> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(xs.len(), 5);
    assert!((xs[0] - 0.5).abs() < 1e-15);
    assert!((xs[4] - 2.5).abs() < 1e-15);
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn qplanck_flag_combinations_are_validated() {
    let (code, _, stderr) = run(&["qplanck", "--lambda", "0.1"]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: invalid input:"), "{}", stderr);

    let (code, _, _) = run(&[
        "qplanck", "--lambda", "0.1", "--x", "1", "--x-min", "0.5", "--x-max", "1.0", "--x-steps",
        "3",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn soft_temperature_accuracy_failure_exits_three() {
    let (code, _, stderr) = run(&["qplanck", "--lambda", "0", "--x", "1e-9"]);
    assert_eq!(code, 3, "{}", stderr);
    assert!(stderr.starts_with("error: accuracy:"), "{}", stderr);
}

#[test]
fn unreadable_input_exits_two_with_reason() {
    let (code, _, stderr) = run(&["pnd", "/nonexistent/state.json"]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: invalid input: cannot read"), "{}", stderr);
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn malformed_document_exits_two_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.json", "{\"n_modes\": \"many\"}");
    let (code, _, stderr) = run(&["pnd", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: invalid input: malformed state document"), "{}", stderr);
}

#[test]
fn unphysical_state_still_reports_then_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"n_modes":1,"mean":[0.0,0.0],"disp":[[0.1,0.0],[0.0,0.1]]}"#;
    let state = write_file(dir.path(), "unphysical.json", doc);
    let (code, stdout, stderr) = run(&["state", state.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stdout.contains("physical,false"), "{}", stdout);
    assert!(stderr.starts_with("error: invalid state:"), "{}", stderr);
}

#[test]
fn singular_variant_exits_two_and_names_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let vacuum = make_state(dir.path(), "vacuum.json", &["vacuum"]);
    let (code, _, stderr) = run(&[
        "pnd",
        vacuum.to_str().unwrap(),
        "--cutoff",
        "4",
        "--variant",
        "literal-y",
    ]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: singular matrix"), "{}", stderr);
}

#[test]
fn sign_flipped_variant_fails_accuracy_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let thermal = make_state(dir.path(), "thermal.json", &["thermal", "--nbar", "1.0"]);
    let (code, _, stderr) = run(&[
        "pnd",
        thermal.to_str().unwrap(),
        "--cutoff",
        "6",
        "--variant",
        "negated-r",
    ]);
    assert_eq!(code, 3);
    assert!(stderr.starts_with("error: accuracy:"), "{}", stderr);
}

#[test]
fn unknown_variant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let vacuum = make_state(dir.path(), "vacuum.json", &["vacuum"]);
    let (code, _, stderr) = run(&["pnd", vacuum.to_str().unwrap(), "--variant", "bogus"]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: invalid input:"), "{}", stderr);
}

#[test]
fn jsonl_output_parses_line_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let thermal = make_state(dir.path(), "thermal.json", &["thermal", "--nbar", "0.5"]);
    let (code, stdout, _) = run(&[
        "pnd",
        thermal.to_str().unwrap(),
        "--cutoff",
        "3",
        "--format",
        "jsonl",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5);
    let meta: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(meta["variant"], "regular");
    assert_eq!(meta["cutoff"], 3);
    for line in &lines[1..] {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(row["probability"].as_f64().unwrap() >= 0.0);
        assert!(row["n"].is_array());
    }
}

#[test]
fn floquet_constant_rotation_reports_folded_phases() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"kind":"constant","b":[[1.3,0.0],[0.0,1.3]],"period":1.0}"#;
    let ham = write_file(dir.path(), "rotation.json", doc);
    let (code, stdout, stderr) = run(&["floquet", ham.to_str().unwrap(), "--steps", "512"]);
    assert_eq!(code, 0, "{}", stderr);
    let residual: f64 = comment_value(&stdout, "symplectic_residual").parse().unwrap();
    assert!(residual <= 1e-9);
    let phases: Vec<f64> = stdout
        .lines()
        .filter_map(|l| l.strip_prefix("phase,"))
        .map(|rest| rest.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(phases.len(), 2);
    assert!((phases[0] + 1.3).abs() < 1e-8);
    assert!((phases[1] - 1.3).abs() < 1e-8);
    assert!(stdout.contains("conjugacy,0,elliptic"));
    let s_t: Vec<Vec<f64>> =
        serde_json::from_str(&comment_value(&stdout, "s_t")).expect("s_t is JSON");
    assert_eq!(s_t.len(), 2);
    assert!((s_t[0][0] - 1.3f64.cos()).abs() < 1e-9);
}

#[test]
fn floquet_jsonl_is_one_object() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"kind":"mathieu","omega0":1.0,"epsilon":0.05,"drive":2.5}"#;
    let ham = write_file(dir.path(), "mathieu.json", doc);
    let (code, stdout, _) = run(&[
        "floquet",
        ham.to_str().unwrap(),
        "--steps",
        "1024",
        "--format",
        "jsonl",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let report: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(report["conjugacy"][0], "elliptic");
    assert_eq!(report["phases"].as_array().unwrap().len(), 2);
    assert!(report["invariance_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn incommensurate_period_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"kind":"mathieu","omega0":1.0,"epsilon":0.1,"drive":2.0}"#;
    let ham = write_file(dir.path(), "mathieu.json", doc);
    let (code, _, stderr) = run(&["floquet", ham.to_str().unwrap(), "--period", "1.0"]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: invalid input:"), "{}", stderr);
}

#[test]
fn output_file_matches_stdout_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let squeezed = make_state(dir.path(), "squeezed.json", &["squeezed", "--r", "0.5"]);
    let (code, stdout, _) = run(&["pnd", squeezed.to_str().unwrap(), "--cutoff", "10"]);
    assert_eq!(code, 0);

    let out_path = dir.path().join("table.csv");
    let (code, piped, _) = run(&[
        "pnd",
        squeezed.to_str().unwrap(),
        "--cutoff",
        "10",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(piped.is_empty());
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), stdout);
}

#[test]
fn worker_env_garbage_is_rejected() {
    let (code, _, stderr) = run_with_env(
        &["qplanck", "--lambda", "0", "--x", "1"],
        &[("PHOTONDIST_THREADS", "three")],
    );
    assert_eq!(code, 2);
    assert!(stderr.contains("PHOTONDIST_THREADS"), "{}", stderr);
}

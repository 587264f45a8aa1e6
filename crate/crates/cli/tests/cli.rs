//! End-to-end runs of the binary: file formats, exit codes, validation
//! diagnostics and report determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_potkit"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("potkit-cli-{tag}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn field_of_a_unit_atom_writes_the_kernel_value() {
    let dir = workdir("field");
    let measure = dir.join("measure.json");
    write(
        &measure,
        r#"{"dimension": 3, "atoms": [[[0.0, 0.0, 0.0], 1.0]], "density": null}"#,
    );
    let points = dir.join("points.csv");
    write(&points, "1,0,0\n0,2,0\n");
    let out = dir.join("field.csv");
    let output = bin()
        .args([
            "field",
            "--operator",
            "potential",
            "--kernel",
            "riesz",
            "--dimension",
            "3",
        ])
        .arg("--measure")
        .arg(&measure)
        .arg("--points")
        .arg(&points)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_success(&output);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["1,0,0,1", "0,2,0,0.25"]);
}

#[test]
fn capacity_values_are_monotone_under_set_inclusion() {
    let dir = workdir("capacity");
    let small = dir.join("small.json");
    write(
        &small,
        r#"{"dimension": 2, "h": 0.25, "centers": [[0.125, 0.125], [0.375, 0.125]]}"#,
    );
    let large = dir.join("large.json");
    write(
        &large,
        r#"{"dimension": 2, "h": 0.25,
            "centers": [[0.125, 0.125], [0.375, 0.125], [0.125, 0.375], [0.875, 0.875]]}"#,
    );
    let run = |set: &Path, out: &Path| {
        let output = bin()
            .args(["capacity", "--refinement", "2"])
            .arg("--set")
            .arg(set)
            .arg("--output")
            .arg(out)
            .output()
            .unwrap();
        assert_success(&output);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        report["result"]["value"].as_f64().unwrap()
    };
    let v_small = run(&small, &dir.join("small-out.json"));
    let v_large = run(&large, &dir.join("large-out.json"));
    assert!(v_small > 0.0);
    assert!(v_small <= v_large + 1e-12);
}

#[test]
fn reports_are_deterministic_modulo_the_header_timestamp() {
    let dir = workdir("determinism");
    let measure = dir.join("measure.json");
    write(
        &measure,
        r#"{"dimension": 2, "atoms": [[[0.2, 0.3], 0.7], [[0.8, 0.5], 0.3]], "density": null}"#,
    );
    let run = |out: &Path| {
        let output = bin()
            .args([
                "lipschitz",
                "--kernel",
                "riesz",
                "--dimension",
                "2",
                "--window-lo",
                "-0.5,-0.5",
                "--window-hi",
                "1.5,1.5",
                "--pairs",
                "50",
                "--seed",
                "11",
            ])
            .arg("--measure")
            .arg(&measure)
            .arg("--output")
            .arg(out)
            .output()
            .unwrap();
        assert_success(&output);
        let mut report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        let timestamp = report["header"]["timestamp_unix"].take();
        assert!(timestamp.as_u64().is_some());
        // the destination path is part of the config echo; everything else
        // must match byte for byte
        report["header"]["config"]["output"].take();
        report
    };
    let first = run(&dir.join("a.json"));
    let second = run(&dir.join("b.json"));
    assert_eq!(first, second);
    // the config echo and seed are embedded in the header
    assert_eq!(first["header"]["config"]["seed"], 11);
    assert_eq!(first["header"]["config"]["subcommand"], "lipschitz");
}

#[test]
fn validate_reports_offending_fields_and_exit_codes() {
    let dir = workdir("validate");
    let config = dir.join("bad.json");
    write(
        &config,
        r#"{"subcommand": "capacity", "set": "/no/such/set.json", "mesh": -1.0, "output": "out.json"}"#,
    );
    let output = bin().arg("validate").arg("--config").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("mesh"));
    assert!(stdout.contains("set"));
    // machine-readable error record on stderr
    let stderr = String::from_utf8_lossy(&output.stderr);
    let record: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(record["code"], 3);
    assert_eq!(record["kind"], "validation");

    let good = dir.join("good.json");
    let set = dir.join("set.json");
    write(&set, r#"{"dimension": 2, "h": 0.5, "centers": [[0.25, 0.25]]}"#);
    write(
        &good,
        &format!(
            r#"{{"subcommand": "capacity", "set": "{}", "output": "out.json"}}"#,
            set.display()
        ),
    );
    let output = bin().arg("validate").arg("--config").arg(&good).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "ok");
}

#[test]
fn run_executes_a_config_file() {
    let dir = workdir("run");
    let set = dir.join("set.json");
    write(&set, r#"{"dimension": 2, "h": 0.5, "centers": [[0.25, 0.25]]}"#);
    let out = dir.join("capacity.json");
    let config = dir.join("run.json");
    write(
        &config,
        &format!(
            r#"{{"subcommand": "capacity", "set": "{}", "output": "{}"}}"#,
            set.display(),
            out.display()
        ),
    );
    let output = bin().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_success(&output);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["result"]["value"].as_f64().unwrap() > 0.0);
    assert_eq!(report["result"]["direction"], "UpperBiased");
}

#[test]
fn parse_errors_exit_with_code_two() {
    let dir = workdir("parse");
    let config = dir.join("broken.json");
    write(&config, "{ not json");
    let output = bin().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn levelset_writes_decay_rows_and_band_cells() {
    let dir = workdir("levelset");
    let measure = dir.join("ball.json");
    // a small uniform ball density on an 8³ grid
    let n = 8usize;
    let h = 2.1 / n as f64;
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = [
                    -1.05 + (i as f64 + 0.5) * h,
                    -1.05 + (j as f64 + 0.5) * h,
                    -1.05 + (k as f64 + 0.5) * h,
                ];
                let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                values.push(if r <= 1.0 { 1.0 } else { 0.0 });
            }
        }
    }
    let measure_json = serde_json::json!({
        "dimension": 3,
        "atoms": [],
        "density": {
            "origin": [-1.05, -1.05, -1.05],
            "h": h,
            "shape": [n, n, n],
            "values": values,
        }
    });
    write(&measure, &measure_json.to_string());
    let out = dir.join("levelset.json");
    let cells = dir.join("cells.csv");
    let output = bin()
        .args(["levelset", "--level", "5.0", "--bands", "1.2,0.6,0.3"])
        .arg("--measure")
        .arg(&measure)
        .arg("--output")
        .arg(&out)
        .arg("--cells-csv")
        .arg(&cells)
        .output()
        .unwrap();
    assert_success(&output);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rows = report["result"]["decay"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let csv = fs::read_to_string(&cells).unwrap();
    let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(
        data_rows,
        report["result"]["report"]["cells"].as_array().unwrap().len()
    );
}

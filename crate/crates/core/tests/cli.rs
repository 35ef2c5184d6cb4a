use std::path::{Path, PathBuf};
use std::process::Command;

use bnpci::cli;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bnpci").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn synth(dir: &Path, model: u8, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("m{model}_{n}_{seed}.csv"));
    let (code, _, err) = run(&[
        "synth",
        "--model",
        &model.to_string(),
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    path
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(schema_name: &str, instance: &Value) {
    let base = schema("test_result.schema.json");
    let root = schema(schema_name);
    let validator = jsonschema::options()
        .with_resource(
            "https://example.invalid/bnpci/test_result.schema.json",
            jsonschema::Resource::from_contents(base).unwrap(),
        )
        .build(&root)
        .unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn synth_writes_xyz_header() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 3, 50, 1);
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z"));
    assert_eq!(lines.count(), 50);
}

#[test]
fn test_json_matches_schema() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 2, 400, 7);
    let (code, out, _) = run(&["test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z"]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&out).unwrap();
    validate("test_result.schema.json", &value);
    assert_eq!(value["n"], 400);
    assert_eq!(value["config"]["depth_z"], 9);
}

#[test]
fn quantile_scheme_is_recorded() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 1, 200, 2);
    let (code, out, _) = run(&[
        "test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z", "--scheme", "quantile",
    ]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&out).unwrap();
    validate("test_result.schema.json", &value);
    assert_eq!(value["config"]["scheme"], "quantile");
}

#[test]
fn graph_json_matches_schema_and_dot_agrees() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 4, 500, 3);
    let data = path.to_str().unwrap();
    let (code, out, _) = run(&["graph", "--data", data, "--given", "z", "--format", "json"]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&out).unwrap();
    validate("graph.schema.json", &value);

    let (code, dot, _) = run(&["graph", "--data", data, "--given", "z"]);
    assert_eq!(code, 0);
    assert!(dot.starts_with("graph dependence {"));
    let visible = value["pairs"].as_array().unwrap().iter().filter(|p| p["visible"] == true).count();
    assert_eq!(dot.matches(" -- ").count(), visible);
}

#[test]
fn csv_output_has_one_data_row() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 2, 100, 0);
    let (code, out, _) = run(&[
        "test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "posterior_h1"));
    assert_eq!(reader.records().count(), 1);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 3, 300, 11);
    let args = ["test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z"];
    let (_, first, _) = run(&args);
    let (_, second, _) = run(&args);
    assert_eq!(first.as_bytes(), second.as_bytes());

    let again = synth(dir.path(), 3, 300, 11);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(again).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 4, 5000, 5);
    let exe = env!("CARGO_BIN_EXE_bnpci");
    let output = |threads: &str| {
        let out = Command::new(exe)
            .env(cli::THREADS_ENV, threads)
            .args(["test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z"])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(output("1"), output("4"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 1, 20, 0);
    let data = path.to_str().unwrap();

    assert_eq!(run(&["test", "--bogus"]).0, 2);
    assert_eq!(run(&["synth", "--model", "9", "--n", "10"]).0, 2);
    assert_eq!(run(&["test", "--data", data, "--x", "x", "--y", "y", "--z", "z", "--rho", "0"]).0, 2);
    assert_eq!(run(&["test", "--data", data, "--x", "x", "--y", "y", "--z", "z", "--c", "-1"]).0, 2);

    let missing = dir.path().join("absent.csv");
    let (code, _, err) = run(&["test", "--data", missing.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error:"));
    assert_eq!(run(&["test", "--data", data, "--x", "x", "--y", "w", "--z", "z"]).0, 3);
    assert_eq!(run(&["graph", "--data", data, "--given", "q"]).0, 3);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn empty_data_reports_prior() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, "x,y,z\n1,,3\nNA,2,2\n").unwrap();
    let (code, out, err) = run(&[
        "test", "--data", path.to_str().unwrap(), "--x", "x", "--y", "y", "--z", "z", "--prior-h1", "0.3",
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"));
    let value: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(value["n"], 0);
    assert_eq!(value["dropped_rows"], 2);
    assert!((value["posterior_h1"].as_f64().unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn sweep_singleton_and_argmax() {
    let dir = TempDir::new().unwrap();
    let path = synth(dir.path(), 2, 600, 4);
    let data = path.to_str().unwrap();

    let (code, out, _) = run(&["sweep", "--data", data, "--x", "x", "--y", "y", "--z", "z", "--c-grid", "2"]);
    assert_eq!(code, 0);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(out.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(rows.iter().filter(|r| &r[0] == "grid").count(), 1);

    let (_, single, _) = run(&[
        "test", "--data", data, "--x", "x", "--y", "y", "--z", "z", "--c", "2", "--format", "json",
    ]);
    let single: Value = serde_json::from_str(&single).unwrap();
    let log_bf: f64 = rows[0][6].parse().unwrap();
    assert_eq!(log_bf, single["log_bf"].as_f64().unwrap());

    let grid = [0.25, 1.0, 4.0, 16.0];
    let (code, out, _) = run(&[
        "sweep", "--data", data, "--x", "x", "--y", "y", "--z", "z", "--c-grid", "0.25,1,4,16",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(out.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(rows.iter().filter(|r| &r[0] == "grid").count(), grid.len());

    let dataset = bnpci::load_csv(&path, &["x", "y", "z"], bnpci::RescaleMethod::MinMax).unwrap();
    let problem = bnpci::TestProblem::new(
        dataset.values("x").unwrap(),
        dataset.values("y").unwrap(),
        dataset.values("z").unwrap(),
        None,
    )
    .unwrap();
    for (label, kind) in [
        ("argmax_x", bnpci::ResponseKind::X),
        ("argmax_y", bnpci::ResponseKind::Y),
        ("argmax_xy", bnpci::ResponseKind::XY),
    ] {
        let row = rows.iter().find(|r| &r[0] == label).unwrap();
        let best = bnpci::select_c(&problem, &grid, kind, bnpci::Rho::default()).unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), best, "{label}");
    }
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cbsg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbsg"))
        .arg("--no-cache")
        .args(args)
        .env_remove("CBSG_CACHE_DIR")
        .output()
        .expect("spawn cbsg")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "cbsg failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(name: &str, value: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

fn assert_envelope(result_schema: &str, v: &Value) {
    assert_schema("run.schema.json", &v["run"]);
    assert_schema(result_schema, &v["result"]);
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_shipped_fixtures() {
    for name in ["scalar.json", "two_node.json", "three_node.json", "three_node_set.json"] {
        let out = cbsg(&["validate", path_str(&fixture(name))]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok"));
    }
}

#[test]
fn validate_names_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(fixture("two_node.json")).unwrap()).unwrap();
    let r = m["dims"]["r"].as_u64().unwrap() as usize;
    let mut vals = vec![Value::from("0"); r * r];
    for i in 0..r {
        vals[i * r + i] = Value::from(if i == 0 { "-1" } else { "1" });
    }
    m["R"] = Value::Array(vals);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&m).unwrap()).unwrap();

    let out = cbsg(&["validate", path_str(&bad)]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("R not positive definite"));
}

#[test]
fn losses_on_scalar_model() {
    let v = stdout_json(&cbsg(&["losses", path_str(&fixture("scalar.json"))]));
    assert_envelope("losses.schema.json", &v);
    let r = &v["result"];
    assert_eq!(r["entries"].as_array().unwrap().len(), 2);
    assert_eq!(r["ranking"], serde_json::json!([1]));
    assert_eq!(r["entries"][1]["delta"].as_f64(), Some(0.0));
    let ol = r["open_loop_delta"].as_f64().unwrap();
    assert!((ol - r["entries"][0]["delta"].as_f64().unwrap()).abs() < 1e-15);
}

#[test]
fn solve_outputs_match_schema() {
    let model = fixture("three_node.json");
    let set = fixture("three_node_set.json");
    let fixed = stdout_json(&cbsg(&["solve", path_str(&model), "--ga", "0.5", "--gd", "0.7"]));
    assert_envelope("solve.schema.json", &fixed);
    let inter = stdout_json(&cbsg(&["losses", path_str(&model), "--mode", "inter_node_only"]));
    assert_envelope("losses.schema.json", &inter);
    for kind in ["average", "nominal-eval"] {
        let v = stdout_json(&cbsg(&["solve", path_str(&set), "--game", kind, "--ga", "0.5", "--gd", "0.7"]));
        assert_envelope("solve.schema.json", &v);
        assert_eq!(v["result"]["per_model"].as_array().unwrap().len(), 3);
    }
    let io = stdout_json(&cbsg(&["io-baseline", path_str(&model), "--ga", "0.8", "--gd", "0.8"]));
    assert_envelope("io-baseline.schema.json", &io);
}

#[test]
fn one_point_sweep_equals_solve() {
    let model = fixture("three_node.json");
    let solved = stdout_json(&cbsg(&["solve", path_str(&model), "--ga", "0.3", "--gd", "0.6", "--La", "2", "--Ld", "4"]));
    let out = cbsg(&["sweep", path_str(&model), "--ga-grid", "0.3", "--gd-grid", "0.6", "--la-grid", "2", "--ld-grid", "4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let header: Value = serde_json::from_str(lines[0].strip_prefix("# ").unwrap()).unwrap();
    assert_schema("run.schema.json", &header);
    let cols: Vec<&str> = lines[1].split(',').collect();
    let row: Vec<&str> = lines[2].split(',').collect();
    let field = |name: &str| row[cols.iter().position(|c| *c == name).unwrap()];
    let eq = &solved["result"]["equilibrium"];
    assert_eq!(field("attacker_payoff").parse::<f64>().unwrap(), eq["attacker_payoff"].as_f64().unwrap());
    let steps = |a: &Value| a["steps"].as_array().unwrap().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
    assert_eq!(field("a_star"), steps(&eq["a_star"]));
    assert_eq!(field("d_star"), steps(&eq["d_star"]));
    assert_eq!(field("status"), "ok");
}

fn without_timings(mut v: Value) -> Value {
    v["run"].as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn repeated_runs_are_identical_apart_from_timings() {
    let model = fixture("three_node.json");
    let args = ["solve", path_str(&model), "--ga", "0.4", "--gd", "0.9"];
    let a = without_timings(stdout_json(&cbsg(&args)));
    let b = without_timings(stdout_json(&cbsg(&args)));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    // Thread count does not change the result either.
    let mut threaded = vec!["--jobs", "1"];
    threaded.extend_from_slice(&args);
    let c = without_timings(stdout_json(&cbsg(&threaded)));
    assert_eq!(a["result"], c["result"]);
}

#[test]
fn cached_tables_give_the_same_answer() {
    let cache = tempfile::tempdir().unwrap();
    let model = fixture("two_node.json");
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_cbsg"))
            .args(["--cache-dir", path_str(cache.path()), "losses", path_str(&model)])
            .output()
            .unwrap();
        without_timings(stdout_json(&out))
    };
    let cold = run();
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 1);
    let warm = run();
    assert_eq!(cold, warm);
}

#[test]
fn exit_codes() {
    let model = fixture("three_node.json");
    let m = path_str(&model);
    assert_eq!(code(&cbsg(&["validate", "/nonexistent/model.json"])), 3);
    assert_eq!(code(&cbsg(&["solve", m])), 2, "costs are required");
    assert_eq!(code(&cbsg(&["solve", m, "--frobnicate"])), 2);
    assert_eq!(code(&cbsg(&["solve", m, "--ga=-1", "--gd", "1"])), 6);
    assert_eq!(code(&cbsg(&["--node-cap", "2", "losses", m])), 6);

    let out = cbsg(&["sweep", m, "--ga-grid", "0,0.5", "--gd-grid", "0.5"]);
    assert_eq!(code(&out), 7);
    let text = String::from_utf8(out.stdout).unwrap();
    let statuses: Vec<&str> = text.lines().skip(2).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(statuses.len(), 2);
    assert!(statuses[0].starts_with("error"));
    assert_eq!(statuses[1], "ok");
}

#[test]
fn singleton_set_has_no_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set.json");
    let member = fixture("three_node.json");
    let manifest = serde_json::json!({ "models": [path_str(&member)] });
    std::fs::write(&set, manifest.to_string()).unwrap();
    let csv = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.json");

    let out = cbsg(&[
        "robust", path_str(&set), "--ga-grid", "0.2,0.5,1", "--gd-grid", "0.3,0.8",
        "--out", path_str(&csv), "--summary", path_str(&summary),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_envelope("robust-summary.schema.json", &s);
    for game in ["nominal_game", "average_game"] {
        let stats = &s["result"][game];
        let values = stats["values"].as_array().unwrap();
        assert_eq!(values.len() + stats["degenerate"].as_u64().unwrap() as usize, 6);
        assert!(values.iter().all(|v| v.as_f64() == Some(0.0)));
    }
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 2 + 6);
}

#[test]
fn robust_summary_on_fixture_set() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let out = cbsg(&[
        "robust", path_str(&fixture("three_node_set.json")), "--ga-grid", "0.2,1", "--gd-grid", "0.5",
        "--out", path_str(&csv),
    ]);
    assert_eq!(code(&out), 0);
    // Without --summary the summary lands next to the CSV.
    let s: Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("summary.json")).unwrap()).unwrap();
    assert_envelope("robust-summary.schema.json", &s);
    assert_eq!(s["result"]["controller_mismatch_pct"][0].as_f64(), Some(0.0));
}

#[test]
fn fixtures_command_reproduces_shipped_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbsg(&["fixtures", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 0);
    for name in ["scalar.json", "three_node.json", "three_node_set.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(fixture(name)).unwrap(),
            "{name}"
        );
    }
}

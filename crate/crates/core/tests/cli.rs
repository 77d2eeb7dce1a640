use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Registry, Validator};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_joinguard"));
    c.env_remove("JOINGUARD_MAX_ROWS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn load_schema(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn validator(name: &str) -> Validator {
    let registry = Registry::new()
        .add("urn:joinguard:schema:uniqueness_report", load_schema("uniqueness_report"))
        .unwrap()
        .prepare()
        .unwrap();
    jsonschema::options().with_registry(&registry).build(&load_schema(name)).unwrap()
}

fn assert_valid(schema: &str, doc: &Value) {
    let v = validator(schema);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}\n{doc:#}");
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

struct Workdir {
    dir: tempfile::TempDir,
}

impl Workdir {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str, contents: &str) -> String {
        let p = self.dir.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }
}

const LEFT: &str = "age,gender,chol\n30,M,200\n30,M,200\n40,F,180\n52,M,240\n";
const RIGHT: &str = "age,gender,id\n30,M,p1\n40,F,p2\n52,M,p3\n61,F,p4\n";

#[test]
fn uniqueness_on_identical_rows() {
    let w = Workdir::new();
    let input = w.file("t.csv", "a,b\n1,x\n1,x\n1,x\n");
    let out = run(&["uniqueness", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out.stdout);
    assert_valid("uniqueness_report", &doc);
    assert_eq!(doc["distinct_ratio"]["value"].as_f64().unwrap(), 1.0 / 3.0);
    assert_eq!(doc["singleton_ratio"]["value"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["min_group_size"], 3);
}

#[test]
fn uniqueness_attrs_and_drop() {
    let w = Workdir::new();
    let input = w.file("t.csv", LEFT);
    let out = run(&["uniqueness", "--input", &input, "--attrs", "age,gender"]);
    assert_eq!(json(&out.stdout)["distinct_count"], 3);
    let out = run(&["uniqueness", "--input", &input, "--drop", "chol"]);
    assert_eq!(json(&out.stdout)["attrs"], serde_json::json!(["age", "gender"]));
}

#[test]
fn uniqueness_csv_output() {
    let w = Workdir::new();
    let input = w.file("t.csv", "a,b\n1,x\n1,x\n1,x\n");
    let out = run(&["uniqueness", "--input", &input, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("attrs,distinct_count"));
    assert!(lines[1].starts_with("a;b,1,"));
}

#[test]
fn assess_reports_decrease_for_unique_partner() {
    let w = Workdir::new();
    let (l, r) = (w.file("l.csv", LEFT), w.file("r.csv", RIGHT));
    let out = run(&["assess", "--left", &l, "--right", &r, "--keys", "age=age,gender=gender"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out.stdout);
    assert_valid("leakage_assessment", &doc);
    assert_eq!(doc["overall_direction"], "Decrease");
    assert_eq!(doc["baseline"], 1.0);
    assert_eq!(doc["report_ab"]["n_rows"], 4);

    let one = json(
        &run(&["assess", "--left", &l, "--right", &r, "--keys", "age,gender", "--baseline", "one"]).stdout,
    );
    assert_eq!(one["baseline_mode"], "one");
}

#[test]
fn assess_disjoint_keys_is_an_empty_join() {
    let w = Workdir::new();
    let l = w.file("l.csv", "age,gender\n30,M\n");
    let r = w.file("r.csv", "age,gender\n31,M\n");
    let out = run(&["assess", "--left", &l, "--right", &r, "--keys", "age,gender"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    let doc: Value = serde_json::from_str(&err).unwrap();
    assert_valid("error", &doc);
    assert_eq!(doc["error"], "empty_join");
    assert!(doc["message"].as_str().unwrap().contains("empty join"));
}

#[test]
fn row_cap_from_env_and_flag() {
    let w = Workdir::new();
    let (l, r) = (w.file("l.csv", LEFT), w.file("r.csv", RIGHT));
    let args = ["assess", "--left", &l, "--right", &r, "--keys", "age,gender"];
    let out = bin().args(args).env("JOINGUARD_MAX_ROWS", "2").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"], "join_explosion");

    let out = bin().args(args).args(["--max-rows", "100"]).env("JOINGUARD_MAX_ROWS", "2").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["assess", "--left", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(&["predict", "--model", "m.json", "--ua", "abc", "--ub", "1"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_pipeline_error() {
    let out = run(&["uniqueness", "--input", "/nonexistent/t.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_valid("error", &json(&out.stderr));
}

#[test]
fn generate_train_predict_evaluate() {
    let w = Workdir::new();
    let corpus = w.path("corpus.jsonl");
    let model = w.path("model.json");

    let out = run(&["generate", "--pairs", "60", "--seed", "7", "--out", &corpus]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out.stdout);
    assert_valid("generate_summary", &summary);
    assert_eq!(summary["examples"].as_u64().unwrap() + summary["skipped"].as_u64().unwrap(), 60);
    for line in std::fs::read_to_string(&corpus).unwrap().lines() {
        assert_valid("labeled_example", &serde_json::from_str(line).unwrap());
    }

    let out = run(&["train", "--corpus", &corpus, "--out", &model]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_valid("train_summary", &json(&out.stdout));
    assert_valid("model", &json(&std::fs::read(&model).unwrap()));

    let out = run(&["predict", "--model", &model, "--ua", "0.2946", "--ub", "1.0"]);
    assert_eq!(out.status.code(), Some(0));
    let p = json(&out.stdout);
    assert_valid("prediction", &p);
    assert!(p["signal"].as_f64().unwrap() < 0.0);
    assert_eq!(p["direction"], "Decrease");

    let out = run(&["evaluate", "--model", &model, "--corpus", &corpus]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_valid("eval_report", &report);
    assert_eq!(report["n"], summary["examples"]);
}

#[test]
fn accuracy_gate_exits_three() {
    let w = Workdir::new();
    let corpus = w.path("corpus.jsonl");
    let model = w.path("model.json");
    assert_eq!(run(&["generate", "--pairs", "20", "--seed", "3", "--out", &corpus]).status.code(), Some(0));
    assert_eq!(run(&["train", "--corpus", &corpus, "--out", &model, "--trees", "5"]).status.code(), Some(0));

    // Every target is an increase, which a model trained on generated pairs never predicts.
    let line = |u: f64| {
        format!(
            r#"{{"features":[{u},{u}],"target":0.5,"pair_seed":0,"meta":{{"index":0,"attempts":1,"rows_a":1,"rows_b":1,"rows_ab":1,"cols_a":1,"cols_b":1}}}}"#
        )
    };
    let held = w.file("held.jsonl", &[line(0.4), line(0.6), line(0.8)].join("\n"));
    let out = run(&["evaluate", "--model", &model, "--corpus", &held, "--min-accuracy", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_valid("eval_report", &json(&out.stdout));
    let err = json(&out.stderr);
    assert_valid("error", &err);
    assert_eq!(err["error"], "accuracy_gate");

    let out = run(&["evaluate", "--model", &model, "--corpus", &held, "--min-accuracy", "0.0"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn corrupt_model_is_a_persistence_error() {
    let w = Workdir::new();
    let model = w.file("m.json", "{\"version\": \"joinguard-gbdt/1\", \"trees\": [");
    let out = run(&["predict", "--model", &model, "--ua", "0.5", "--ub", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"], "persistence");
}

#[test]
fn stdout_is_byte_identical_across_runs() {
    let w = Workdir::new();
    let (l, r) = (w.file("l.csv", LEFT), w.file("r.csv", RIGHT));
    let args = ["assess", "--left", &l, "--right", &r, "--keys", "age,gender"];
    assert_eq!(run(&args).stdout, run(&args).stdout);

    let (c1, c2) = (w.path("c1.jsonl"), w.path("c2.jsonl"));
    run(&["generate", "--pairs", "10", "--seed", "99", "--out", &c1]);
    run(&["generate", "--pairs", "10", "--seed", "99", "--out", &c2, "--serial"]);
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_task-trickle");
const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/sports_music_crafts");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    p
}

fn fixture_index(dir: &TempDir) -> String {
    let out = dir.path().join("fixture.idx");
    let out_s = out.to_str().unwrap();
    let report = stdout_json(&run(&[
        "build-index",
        "--ontology",
        &fixture("ontology.json"),
        "--embeddings",
        &fixture("embeddings.txt"),
        "--out",
        out_s,
    ]));
    assert_eq!(report["nodes"], 9);
    out_s.to_string()
}

#[test]
fn build_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let doc = stdout_json(&run(&["infer", "--index", &index, "--labels", &fixture("labels_baseball.json")]));
    let suggestions = doc["suggestions"].as_array().unwrap();
    assert!(!suggestions.is_empty() && suggestions.len() <= 5);
    assert_eq!(suggestions[0]["title"], "Pitch a Baseball");
    assert_eq!(suggestions[0]["rank"], 1);
    assert!(doc.get("explain").is_none_or(Value::is_null));
}

#[test]
fn k_one_returns_one_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let doc = stdout_json(&run(&[
        "infer",
        "--index",
        &index,
        "--labels",
        &fixture("labels_guitar.json"),
        "--k",
        "1",
        "--explain",
    ]));
    assert_eq!(doc["suggestions"].as_array().unwrap().len(), 1);
    assert!(doc["explain"].is_object());
}

#[test]
fn resident_strategy_and_unknown_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let labels = fixture("labels_baseball.json");
    let doc = stdout_json(&run(&["infer", "--index", &index, "--labels", &labels, "--rank-with", "resident"]));
    assert_eq!(doc["suggestions"][0]["title"], "Pitch a Baseball");

    let out = run(&["infer", "--index", &index, "--labels", &labels, "--rank-with", "nope"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown-strategy"));
}

#[test]
fn cyclic_ontology_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let ontology = write(
        dir.path(),
        "cyclic.json",
        &json!({
            "format_version": 1,
            "root": "r",
            "nodes": [
                {"id": "r", "name": "Root", "children": ["a"], "articles": []},
                {"id": "a", "name": "A", "children": ["b"], "articles": ["t1"]},
                {"id": "b", "name": "B", "children": ["a"], "articles": ["t2"]}
            ],
            "articles": [
                {"id": "t1", "title": "Pitch a Baseball", "body": ""},
                {"id": "t2", "title": "Hit a Baseball", "body": ""}
            ]
        }),
    );
    let out = run(&[
        "build-index",
        "--ontology",
        ontology.to_str().unwrap(),
        "--embeddings",
        &fixture("embeddings.txt"),
        "--out",
        dir.path().join("x.idx").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("cycle") && stderr.contains("\"a\""), "{stderr}");
    assert!(!dir.path().join("x.idx").exists());
}

#[test]
fn disjoint_vocabulary_is_a_build_error() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.txt");
    fs::write(&emb, "2 2\nzebra 1 0\nyak 0 1\n").unwrap();
    let out = run(&[
        "build-index",
        "--ontology",
        &fixture("ontology.json"),
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        dir.path().join("x.idx").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_embeddings_are_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.txt");
    fs::write(&emb, "2 3\nbaseball 1 0 0\npitch 1 0\n").unwrap();
    let out = run(&[
        "build-index",
        "--ontology",
        &fixture("ontology.json"),
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        dir.path().join("x.idx").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn labels_below_floor_fail_inference() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let labels = write(
        dir.path(),
        "weak.json",
        &json!([{"text": "baseball", "confidence": 0.05}, {"text": "guitar", "confidence": 0.01}]),
    );
    let out = run(&["infer", "--index", &index, "--labels", labels.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty-after-filter"));
}

#[test]
fn edited_source_invalidates_index() {
    let dir = tempfile::tempdir().unwrap();
    let ontology = dir.path().join("ontology.json");
    let embeddings = dir.path().join("embeddings.txt");
    fs::copy(fixture("ontology.json"), &ontology).unwrap();
    fs::copy(fixture("embeddings.txt"), &embeddings).unwrap();
    let index = dir.path().join("x.idx");
    stdout_json(&run(&[
        "build-index",
        "--ontology",
        ontology.to_str().unwrap(),
        "--embeddings",
        embeddings.to_str().unwrap(),
        "--out",
        index.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&embeddings).unwrap().replacen("baseball 0.6 1", "baseball 0.7 1", 1);
    fs::write(&embeddings, text).unwrap();
    let out = run(&["infer", "--index", index.to_str().unwrap(), "--labels", &fixture("labels_baseball.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn eval_saturated_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let report = stdout_json(&run(&["eval", "--index", &index, "--corpus", &fixture("corpus.json")]));
    assert_eq!(report["hit_at_1"], 1.0);
    assert_eq!(report["hit_at_5"], 1.0);
    assert_eq!(report["mrr"], 1.0);
    assert_eq!(report["scored"], 2);
}

#[test]
fn eval_second_place_and_missing_gold() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let labels = fixture("labels_baseball.json");
    // Find what ranks second for the baseball labels, then make it gold.
    let doc = stdout_json(&run(&["infer", "--index", &index, "--labels", &labels]));
    let second = doc["suggestions"][1]["article_id"].as_str().unwrap().to_string();
    let corpus = write(
        dir.path(),
        "corpus.json",
        &json!({
            "format_version": 1,
            "records": [
                {"labels": labels, "gold": second},
                {"labels": labels, "gold": "no-such-article"}
            ]
        }),
    );
    let report = stdout_json(&run(&["eval", "--index", &index, "--corpus", corpus.to_str().unwrap()]));
    assert_eq!(report["mrr"], 0.5);
    assert_eq!(report["hit_at_1"], 0.0);
    assert_eq!(report["hit_at_5"], 1.0);
    assert_eq!(report["scored"], 1);
    assert_eq!(report["excluded"], 1);
    assert_eq!(report["rows"][1]["excluded"], true);
}

#[test]
fn eval_synthetic_corpus_metrics_follow_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth");
    stdout_json(&run(&[
        "gen-synthetic",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
        "--min-nodes",
        "40",
        "--max-nodes",
        "80",
        "--queries",
        "50",
    ]));
    let index = dir.path().join("synth.idx");
    stdout_json(&run(&[
        "build-index",
        "--ontology",
        out.join("ontology.json").to_str().unwrap(),
        "--embeddings",
        out.join("embeddings.txt").to_str().unwrap(),
        "--out",
        index.to_str().unwrap(),
    ]));
    let report = stdout_json(&run(&[
        "eval",
        "--index",
        index.to_str().unwrap(),
        "--corpus",
        out.join("corpus.json").to_str().unwrap(),
    ]));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 50);
    let scored: Vec<&Value> = rows.iter().filter(|r| r["excluded"] == false).collect();
    assert_eq!(report["scored"], scored.len());
    let n = scored.len() as f64;
    let rank = |r: &Value| r["rank"].as_u64();
    let hit1 = scored.iter().filter(|r| rank(r) == Some(1)).count() as f64 / n;
    let hit5 = scored.iter().filter(|r| rank(r).is_some_and(|x| x <= 5)).count() as f64 / n;
    let mrr = scored.iter().map(|r| rank(r).map_or(0.0, |x| 1.0 / x as f64)).sum::<f64>() / n;
    let close = |key: &str, want: f64| (report[key].as_f64().unwrap() - want).abs() < 1e-12;
    assert!(close("hit_at_1", hit1) && close("hit_at_5", hit5) && close("mrr", mrr), "{report}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture_index(&dir);
    let args = ["infer", "--index", &index, "--labels", &fixture("labels_baseball.json"), "--explain"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn gen_synthetic_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        stdout_json(&run(&["gen-synthetic", "--out", out.to_str().unwrap(), "--seed", "42", "--queries", "3"]));
    }
    for name in ["ontology.json", "embeddings.txt", "labels.json", "corpus.json", "queries/q0002.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn infeasible_generator_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen-synthetic",
        "--out",
        dir.path().join("g").to_str().unwrap(),
        "--min-nodes",
        "30",
        "--max-nodes",
        "30",
        "--max-fanout",
        "1",
        "--max-depth",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

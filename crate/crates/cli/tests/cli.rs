use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn drskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drskit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = drskit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    drskit(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic grammar corpus with its systematic split in `dir`.
fn prepared(dir: &Path, docs: usize) -> PathBuf {
    ok(&[
        "synth",
        "--kind",
        "grammar",
        "--docs",
        &docs.to_string(),
        "--seed",
        "3",
        "--out",
        s(dir),
    ]);
    let corpus = dir.join("corpus.jsonl");
    ok(&["split", s(&corpus), "--seed", "3", "--out", s(dir)]);
    corpus
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const STUB: &str = r#"
import json, sys
mode = sys.argv[1]
assert json.loads(sys.stdin.readline()) == {"hello": 1}
print(json.dumps({"hello": 1}), flush=True)
for line in sys.stdin:
    req = json.loads(line)
    if mode == "error":
        print(json.dumps({"id": req["id"], "error": "model exploded"}), flush=True)
        continue
    print(json.dumps({"id": req["id"], "pll": -float(len(req["text"])), "tokens": len(req["text"].split())}), flush=True)
"#;

fn stub(dir: &Path, mode: &str) -> String {
    let path = dir.join("stub.py");
    fs::write(&path, STUB).unwrap();
    format!("python3 {} {mode}", path.display())
}

#[test]
fn pipeline_reruns_are_byte_identical_across_worker_counts() {
    let run = |dir: &Path, workers: &str| {
        let corpus = prepared(dir, 400);
        let common = ["--seed", "11", "--workers", workers, "--out", s(dir)];
        let with = |cmd: &[&str]| {
            let mut v: Vec<&str> = cmd.to_vec();
            v.extend_from_slice(&common);
            ok(&v);
        };
        with(&["overlap", s(&corpus)]);
        with(&["stats", s(&corpus)]);
        with(&["recombine", s(&corpus), "--target", "120"]);
        with(&["eval", "--task", "parse", s(&corpus), s(&corpus)]);
        with(&["eval", "--task", "generate", s(&corpus), s(&corpus)]);
        snapshot(dir)
    };
    let a = tempfile::tempdir().unwrap();
    let first = run(a.path(), "1");
    let second = run(a.path(), "1");
    assert_eq!(first, second);
    // A different worker count changes the config digest but nothing else.
    let third = run(a.path(), "4");
    let strip = |files: &[(String, Vec<u8>)]| -> Vec<(String, String)> {
        files
            .iter()
            .map(|(n, b)| {
                let text = String::from_utf8_lossy(b)
                    .replace("\"workers\":4", "\"workers\":1")
                    .replace("\"workers\": 4", "\"workers\": 1");
                let kept: Vec<&str> = text.lines().filter(|l| !l.contains("digest")).collect();
                (n.clone(), kept.join("\n"))
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&third));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "assignment.tsv",
        "split_stats.tsv",
        "overlap_dev.tsv",
        "overlap_test.tsv",
        "histogram_dev.tsv",
        "histogram_test.tsv",
        "overlap_summary.tsv",
        "stats.tsv",
        "candidates_pool.jsonl",
        "candidates_filtered.jsonl",
        "recombine_summary.json",
        "eval_parse.tsv",
        "eval_parse.json",
        "eval_generate.json",
    ] {
        assert!(names.contains(&expected), "missing {expected}: {names:?}");
    }
}

#[test]
fn every_artifact_embeds_the_config_digest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 200);
    let o = s(dir.path());
    ok(&["overlap", s(&corpus), "--out", o]);
    ok(&["recombine", s(&corpus), "--target", "40", "--out", o]);
    ok(&["eval", "--task", "parse", s(&corpus), s(&corpus), "--out", o]);
    for (name, bytes) in snapshot(dir.path()) {
        if name == "corpus.jsonl" || name == "stub.py" {
            continue;
        }
        let text = String::from_utf8(bytes).unwrap();
        let first = text.lines().next().unwrap_or("");
        if name.ends_with(".tsv") {
            assert!(text.contains("# config_digest="), "{name}");
            assert!(text.contains("# config={"), "{name}");
        } else if name.ends_with(".jsonl") {
            let header: Value = serde_json::from_str(first).unwrap();
            assert_eq!(header["header"]["config_digest"].as_str().unwrap().len(), 64, "{name}");
        } else {
            let v: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["config_digest"].as_str().unwrap().len(), 64, "{name}");
            assert!(v["config"].is_object(), "{name}");
        }
    }
}

#[test]
fn split_prints_counts_with_average_lengths() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "random", "--docs", "1000", "--out", s(dir.path())]);
    let out = ok(&["split", s(&dir.path().join("corpus.jsonl")), "--out", s(dir.path())]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("train  800 (")), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("dev    100 (")), "{stdout}");
    let tsv = fs::read_to_string(dir.path().join("assignment.tsv")).unwrap();
    assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 1000);
}

#[test]
fn random_method_and_ratio_flags_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "random", "--docs", "100", "--out", s(dir.path())]);
    let corpus = dir.path().join("corpus.jsonl");
    ok(&[
        "split",
        s(&corpus),
        "--method",
        "random",
        "--ratio",
        "4:3:3",
        "--out",
        s(dir.path()),
    ]);
    let tsv = fs::read_to_string(dir.path().join("assignment.tsv")).unwrap();
    assert!(tsv.contains("# method=random"));
    let count = |split: &str| tsv.lines().filter(|l| l.ends_with(&format!("\t{split}"))).count();
    assert_eq!((count("train"), count("dev"), count("test")), (40, 30, 30));
}

#[test]
fn overlap_of_empty_dev_is_empty_and_bins_sum() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--kind",
        "near-duplicate",
        "--docs",
        "300",
        "--clusters",
        "30",
        "--out",
        s(dir.path()),
    ]);
    let corpus = dir.path().join("corpus.jsonl");
    let ids: Vec<String> = jsonl(&corpus)
        .iter()
        .map(|d| d["id"].as_str().unwrap().to_string())
        .collect();
    let assignment = dir.path().join("manual.tsv");
    let body: String = ids
        .iter()
        .enumerate()
        .map(|(i, id)| format!("{id}\t{}\n", if i % 5 == 0 { "test" } else { "train" }))
        .collect();
    fs::write(&assignment, body).unwrap();
    ok(&[
        "overlap",
        s(&corpus),
        "--assignment",
        s(&assignment),
        "--out",
        s(dir.path()),
    ]);
    let rows = |name: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(String::from)
            .collect()
    };
    assert!(rows("overlap_dev.tsv").is_empty());
    assert!(rows("histogram_dev.tsv").is_empty());
    assert_eq!(rows("overlap_test.tsv").len(), 60);
    let total: usize = rows("histogram_test.tsv")
        .iter()
        .map(|r| r.rsplit('\t').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 60);
}

#[test]
fn zero_target_writes_header_only_candidate_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 60);
    ok(&["recombine", s(&corpus), "--target", "0", "--out", s(dir.path())]);
    for name in ["candidates_pool.jsonl", "candidates_filtered.jsonl"] {
        let lines = jsonl(&dir.path().join(name));
        assert_eq!(lines.len(), 1, "{name}");
        assert!(lines[0]["header"].is_object());
    }
    let summary = json(&dir.path().join("recombine_summary.json"));
    assert_eq!(summary["pool_size"], 0);
    assert_eq!(summary["filtered_size"], 0);
}

#[test]
fn recombine_uses_training_documents_only() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 300);
    ok(&["recombine", s(&corpus), "--target", "100", "--out", s(dir.path())]);
    let tsv = fs::read_to_string(dir.path().join("assignment.tsv")).unwrap();
    let train: std::collections::HashSet<&str> = tsv
        .lines()
        .filter(|l| l.ends_with("\ttrain"))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    let pool = jsonl(&dir.path().join("candidates_pool.jsonl"));
    assert_eq!(pool.len(), 101);
    for c in &pool[1..] {
        assert!(train.contains(c["source_id"].as_str().unwrap()));
    }
}

#[test]
fn two_hundred_candidates_filter_to_ten_with_external_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 400);
    let cmd = stub(dir.path(), "length");
    ok(&[
        "recombine",
        s(&corpus),
        "--target",
        "200",
        "--scorer",
        "external",
        "--scorer-cmd",
        &cmd,
        "--out",
        s(dir.path()),
    ]);
    let pool = jsonl(&dir.path().join("candidates_pool.jsonl"));
    let filtered = jsonl(&dir.path().join("candidates_filtered.jsonl"));
    assert_eq!(pool.len() - 1, 200);
    assert_eq!(filtered.len() - 1, 10);
    let scorer = filtered[0]["header"]["scorer"].as_str().unwrap();
    assert!(scorer.starts_with("external") && scorer.contains("stub.py"), "{scorer}");
    let summary = json(&dir.path().join("recombine_summary.json"));
    assert!(summary["scorer"].as_str().unwrap().contains("stub.py"));

    // The stub scores by negative character length per token; kept items are the
    // best ten of the pool under that key.
    let key = |c: &Value| c["pll"]["normalized"].as_f64().unwrap();
    let mut all: Vec<f64> = pool[1..].iter().map(key).collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let kept: Vec<f64> = filtered[1..].iter().map(key).collect();
    assert_eq!(kept, all[..10].to_vec());
}

#[test]
fn two_hundred_candidates_filter_to_ten_with_reference_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 400);
    ok(&["recombine", s(&corpus), "--target", "200", "--out", s(dir.path())]);
    assert_eq!(jsonl(&dir.path().join("candidates_filtered.jsonl")).len() - 1, 10);
    let summary = json(&dir.path().join("recombine_summary.json"));
    assert!(summary["scorer"].as_str().unwrap().starts_with("reference_ngram"));
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 80);
    let o = s(dir.path());
    ok(&["eval", "--task", "parse", s(&corpus), s(&corpus), "--out", o]);
    let parse = json(&dir.path().join("eval_parse.json"));
    assert_eq!(parse["micro"]["f1"], 1.0);
    assert_eq!(parse["macro_f1"], 1.0);
    assert_eq!(parse["err"], 0.0);
    ok(&["eval", "--task", "generate", s(&corpus), s(&corpus), "--out", o]);
    let generate = json(&dir.path().join("eval_generate.json"));
    assert_eq!(generate["bleu"]["score"], 1.0);
}

#[test]
fn two_malformed_predictions_of_a_hundred_give_err_two() {
    let dir = tempfile::tempdir().unwrap();
    let good =
        "person.n.01 Name \"Mary\"\ncall.v.01 Agent -1 Time +1 Patient +2\ntime.n.08 TPR now\nperson.n.01 Sub speaker";
    let mut gold = String::new();
    let mut pred = String::new();
    for i in 0..100 {
        gold.push_str(&serde_json::json!({"id": format!("d{i}"), "sbn": good}).to_string());
        gold.push('\n');
        let p = match i {
            17 => serde_json::json!({"id": "d17", "sbn": "call.v.01 Agent +9"}),
            63 => serde_json::json!({"id": "d63", "sbn": null}),
            _ => serde_json::json!({"id": format!("d{i}"), "sbn": good}),
        };
        pred.push_str(&p.to_string());
        pred.push('\n');
    }
    // Predictions in reverse order still align by id.
    let pred: String = pred.lines().rev().map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("gold.jsonl"), gold).unwrap();
    fs::write(dir.path().join("pred.jsonl"), pred).unwrap();
    ok(&[
        "eval",
        "--task",
        "parse",
        s(&dir.path().join("pred.jsonl")),
        s(&dir.path().join("gold.jsonl")),
        "--out",
        s(dir.path()),
    ]);
    let report = json(&dir.path().join("eval_parse.json"));
    assert!((report["err"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(report["ill_formed"], 2);
    assert!((report["macro_f1"].as_f64().unwrap() - 0.98).abs() < 1e-12);
    let tsv = fs::read_to_string(dir.path().join("eval_parse.tsv")).unwrap();
    let row = tsv.lines().find(|l| l.starts_with("d17\t")).unwrap();
    assert!(row.starts_with("d17\tfalse\t0\t0\t"), "{row}");
    let first = tsv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(first.starts_with("id\t"));
    assert!(tsv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .nth(1)
        .unwrap()
        .starts_with("d0\t"));
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = s(dir.path());
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["split", "--ratio", "8-1-1"]), 1);
    assert_eq!(code(&["split", "--method", "clever"]), 1);
    assert_eq!(code(&["split", "--out", o]), 1, "no corpus given");
    assert_eq!(code(&["split", "--group-size", "7", "--out", o, "x.jsonl"]), 1);
    assert_eq!(code(&["recombine", "--fraction", "0", "--out", o, "x.jsonl"]), 1);
    assert_eq!(code(&["recombine", "--scorer", "external", "--out", o, "x.jsonl"]), 1);

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&["split", s(&missing), "--out", o]), 2);
    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, "{\"id\": 3}\n").unwrap();
    assert_eq!(code(&["stats", s(&broken), "--out", o]), 2);

    let config = dir.path().join("run.toml");
    fs::write(&config, "sed = 1\n").unwrap();
    assert_eq!(code(&["stats", "--config", s(&config), "--out", o]), 1);
}

#[test]
fn eval_id_mismatch_is_a_data_error_listing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.jsonl");
    let pred = dir.path().join("pred.jsonl");
    fs::write(&gold, "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n").unwrap();
    fs::write(&pred, "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"zz\",\"text\":\"y\"}\n").unwrap();
    let out = drskit(&["eval", "--task", "generate", s(&pred), s(&gold), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[b]") && err.contains("[zz]"), "{err}");
}

#[test]
fn assignment_not_covering_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 30);
    let partial = dir.path().join("partial.tsv");
    let tsv = fs::read_to_string(dir.path().join("assignment.tsv")).unwrap();
    fs::write(&partial, tsv.lines().take(20).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(
        code(&[
            "overlap",
            s(&corpus),
            "--assignment",
            s(&partial),
            "--out",
            s(dir.path())
        ]),
        2
    );
}

#[test]
fn scorer_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 100);
    let o = s(dir.path());
    let cmd = stub(dir.path(), "error");
    assert_eq!(
        code(&[
            "recombine",
            s(&corpus),
            "--target",
            "20",
            "--scorer",
            "external",
            "--scorer-cmd",
            &cmd,
            "--out",
            o
        ]),
        3
    );
    assert_eq!(
        code(&[
            "recombine",
            s(&corpus),
            "--target",
            "20",
            "--scorer",
            "external",
            "--scorer-cmd",
            "exit 0",
            "--out",
            o
        ]),
        3
    );
}

#[test]
fn config_file_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "random", "--docs", "100", "--out", s(dir.path())]);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "seed = 5\ncorpus = {:?}\nout = {:?}\n[split]\nmethod = \"random\"\nratio = \"4:3:3\"\n",
            dir.path().join("corpus.jsonl"),
            dir.path()
        ),
    )
    .unwrap();
    ok(&["split", "--config", s(&config), "--method", "systematic"]);
    let tsv = fs::read_to_string(dir.path().join("assignment.tsv")).unwrap();
    assert!(tsv.contains("# method=systematic"));
    assert!(tsv.contains("# seed=5"));
    assert!(tsv.contains("# ratio=4:3:3"));
}

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use senti::corpus::{TokenizerMode, Vocabulary};
use senti::embedding::EmbeddingMatrix;
use senti::nnet::LstmParams;
use senti::train::{checkpoint, Model, RunInfo};

const BIN: &str = env!("CARGO_BIN_EXE_senti");

fn senti(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("SENTI_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn failure(out: Output) -> String {
    assert!(
        !out.status.success(),
        "expected failure, stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stderr).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    let body = format!(
        r#"{{"tokenizer": "whitespace", "min_count": 1, "maxlen": 8, "embedding_dim": 8,
            "iterations": 2, "hidden": 6, "epochs": 2, "output_dir": "out"{extra}}}"#
    );
    fs::write(&path, body).unwrap();
    path
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn full_pipeline_runs_stage_by_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "");
    ok(senti(
        d,
        &[
            "synth", "--kind", "keyword", "--count", "45", "--output", "kw.csv",
        ],
    ));
    let stats: serde_json::Value = serde_json::from_str(&ok(senti(
        d,
        &[
            "--config",
            "config.json",
            "--format",
            "json",
            "preprocess",
            "kw.csv",
        ],
    )))
    .unwrap();
    assert_eq!(stats["records"], 45);
    assert_eq!(
        stats["train"]["total"].as_u64().unwrap() + stats["test"]["total"].as_u64().unwrap(),
        45
    );

    let emb = ok(senti(d, &["--config", "config.json", "train-embeddings"]));
    assert!(emb.contains("skip-gram"), "{emb}");
    let train = ok(senti(d, &["--config", "config.json", "train"]));
    assert!(train.contains("epoch   2"), "{train}");
    assert!(d.join("out/model-lstm/manifest.json").exists());

    let eval: serde_json::Value = serde_json::from_str(&ok(senti(
        d,
        &[
            "--config",
            "config.json",
            "--format",
            "json",
            "evaluate",
            "--input",
            "kw.csv",
        ],
    )))
    .unwrap();
    assert_eq!(eval["total"], 45);
    assert_eq!(eval["averaging"], "macro");

    let p = ok(senti(
        d,
        &["--config", "config.json", "predict", "w1 great w2"],
    ));
    assert_eq!(p.split('\t').count(), 2, "{p}");

    let mut child = Command::new(BIN)
        .current_dir(d)
        .env_remove("SENTI_OUTPUT_DIR")
        .args(["--config", "config.json", "--format", "json", "predict"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"w1 awful\n\nokay w3\n")
        .unwrap();
    let lines = ok(child.wait_with_output().unwrap());
    let preds: Vec<serde_json::Value> = lines
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(preds.len(), 2);
    for p in preds {
        let probs = &p["probabilities"];
        let sum: f64 = ["negative", "neutral", "positive"]
            .iter()
            .map(|k| probs[k].as_f64().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn compare_is_byte_identical_under_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, "");
    ok(senti(
        d,
        &[
            "synth", "--kind", "keyword", "--count", "60", "--output", "kw.csv",
        ],
    ));
    let mut outputs = Vec::new();
    for out in ["a", "b"] {
        let text = ok(senti(
            d,
            &[
                "--config",
                "config.json",
                "--seed",
                "3",
                "--train-path",
                "kw.csv",
                "--output-dir",
                out,
                "compare",
            ],
        ));
        for model in ["LSTM", "RNN", "Naive Bayes", "Logistic Regression"] {
            assert!(text.contains(model), "{text}");
        }
        assert!(text.contains("Averaging"));
        outputs.push(files(&d.join(out)));
    }
    assert_eq!(outputs[0].len(), 17);
    assert_eq!(outputs[0], outputs[1]);

    let other = ok(senti(
        d,
        &[
            "--config",
            "config.json",
            "--seed",
            "4",
            "--train-path",
            "kw.csv",
            "--output-dir",
            "c",
            "compare",
        ],
    ));
    assert!(!other.is_empty());
    assert_ne!(files(&d.join("c")), outputs[0]);
}

#[test]
fn header_only_csv_fails_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("empty.csv"), "label,text\n").unwrap();
    let err = failure(senti(tmp.path(), &["preprocess", "empty.csv"]));
    assert!(err.contains("no records"), "{err}");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.json"), r#"{"epoch": 3}"#).unwrap();
    let err = failure(senti(d, &["--config", "bad.json", "train"]));
    assert!(err.contains("unknown field"), "{err}");
    failure(senti(d, &["--config", "missing.json", "train"]));
    failure(senti(d, &["train", "--epochs", "zero"]));
    failure(senti(d, &["train", "--model", "svm"]));
    let err = failure(senti(d, &["train"]));
    assert!(err.contains("senti: error:"), "{err}");
    failure(senti(d, &["predict", "--model-dir", "nowhere", "text"]));
    fs::write(d.join("typo.csv"), "label,text\nhappy,hello\n").unwrap();
    failure(senti(d, &["preprocess", "typo.csv"]));
}

#[test]
fn flags_override_environment_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d, r#", "model": "naive_bayes""#);
    ok(senti(
        d,
        &[
            "synth", "--kind", "keyword", "--count", "30", "--output", "kw.csv",
        ],
    ));

    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(BIN);
        c.current_dir(d).env_remove("SENTI_OUTPUT_DIR");
        if let Some(e) = env {
            c.env("SENTI_OUTPUT_DIR", e);
        }
        let mut args = vec!["--config", "config.json", "preprocess", "kw.csv"];
        args.extend_from_slice(extra);
        ok(c.args(args).output().unwrap());
    };
    run(None, &[]);
    assert!(d.join("out/stats.json").exists());
    run(Some("from-env"), &[]);
    assert!(d.join("from-env/stats.json").exists());
    run(Some("from-env"), &["--output-dir", "from-flag"]);
    assert!(d.join("from-flag/stats.json").exists());

    // The bundle manifest echoes the effective configuration.
    ok(senti(
        d,
        &[
            "--config",
            "config.json",
            "--output-dir",
            "from-flag",
            "--nb_alpha",
            "0.5",
            "train",
        ],
    ));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(d.join("from-flag/model-naive-bayes/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["nb_alpha"], 0.5);
    assert_eq!(manifest["config"]["model"], "naive_bayes");
    assert_eq!(manifest["config"]["maxlen"], 8);
    assert_eq!(manifest["config"]["batch_size"], 32);
    assert!(manifest["config"].get("output_dir").is_none());
}

#[test]
fn predict_on_a_zero_weight_model_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let names: Vec<String> = ["好", "坏"].iter().map(|s| s.to_string()).collect();
    let vocab = Vocabulary::build([names], 1).unwrap();
    let emb = EmbeddingMatrix::new(
        senti::linalg::Matrix::zeros(vocab.len(), 4),
        vocab.fingerprint(),
    )
    .unwrap();
    let info = RunInfo {
        seed: 0,
        maxlen: 10,
        tokenizer: TokenizerMode::Character,
        config: serde_json::Value::Null,
    };
    checkpoint(
        &tmp.path().join("zero"),
        &Model::Lstm(LstmParams::zeros(3, 4, 3)),
        Some(&emb),
        &vocab,
        &info,
    )
    .unwrap();
    let text = ok(senti(
        tmp.path(),
        &["predict", "--model-dir", "zero", "今天很好"],
    ));
    assert!(
        text.contains("negative=0.3333 neutral=0.3333 positive=0.3333"),
        "{text}"
    );
    let err = failure(senti(
        tmp.path(),
        &["predict", "--model-dir", "zero", "!!!"],
    ));
    assert!(err.contains("no tokens"), "{err}");
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use senti::corpus::{write_dataset, RawRecord, Sentiment, TokenizerMode, Vocabulary};
use senti::embedding::EmbeddingMatrix;
use senti::nnet::LstmParams;
use senti::pipeline::{
    model_dir_name, predict_text, run_evaluate, run_preprocess, run_train, run_train_embeddings,
    PipelineError, RunConfig,
};
use senti::synthetic::keyword_corpus;
use senti::train::{checkpoint, restore, Model, ModelKind, RunInfo};

fn write_csv(path: &Path, records: &[RawRecord]) {
    let mut f = fs::File::create(path).unwrap();
    write_dataset(&mut f, records).unwrap();
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        out.insert(p.file_name().unwrap().into(), fs::read(&p).unwrap());
    }
    out
}

fn small_config(train: &Path, out: &Path) -> RunConfig {
    RunConfig {
        train_path: Some(train.to_path_buf()),
        output_dir: out.to_path_buf(),
        tokenizer: TokenizerMode::Whitespace,
        min_count: 1,
        maxlen: 8,
        embedding_dim: 8,
        iterations: 2,
        hidden: 6,
        epochs: 2,
        ..Default::default()
    }
}

#[test]
fn preprocess_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("data.csv");
    write_csv(&csv, &keyword_corpus(60, 6, 9));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = run_preprocess(&small_config(&csv, &a)).unwrap();
    let sb = run_preprocess(&small_config(&csv, &b)).unwrap();
    assert_eq!(sa, sb);
    let snap = snapshot(&a);
    assert_eq!(snap.len(), 4);
    assert_eq!(snap, snapshot(&b));
}

#[test]
fn header_only_csv_reports_no_records() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("empty.csv");
    fs::write(&csv, "label,text\n").unwrap();
    let err = run_preprocess(&small_config(&csv, &tmp.path().join("out"))).unwrap_err();
    assert!(matches!(err, PipelineError::NoRecords(_)));
    assert!(err.to_string().contains("no records"), "{err}");
}

#[test]
fn missing_training_path_is_reported() {
    let config = RunConfig::default();
    assert!(matches!(
        run_preprocess(&config),
        Err(PipelineError::MissingInput(_))
    ));
}

#[test]
fn dataset_of_21091_records_reports_its_class_distribution() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("weibo-shaped.csv");
    let mut records = Vec::new();
    for (label, n) in [
        (Sentiment::Negative, 8703),
        (Sentiment::Neutral, 4355),
        (Sentiment::Positive, 8033),
    ] {
        for i in 0..n {
            records.push(RawRecord::new(format!("评论{} {}", i % 37, label), label));
        }
    }
    write_csv(&csv, &records);
    let config = RunConfig {
        train_path: Some(csv),
        output_dir: tmp.path().join("out"),
        ..Default::default()
    };
    let stats = run_preprocess(&config).unwrap();
    assert_eq!(stats.records, 21_091);
    assert_eq!(stats.dropped_empty, 0);
    assert_eq!(stats.train.total + stats.test.total, 21_091);
    assert_eq!(stats.train.negative + stats.test.negative, 8703);
    assert_eq!(stats.train.neutral + stats.test.neutral, 4355);
    assert_eq!(stats.train.positive + stats.test.positive, 8033);
    // Stratified 80/20 split, rounded per class.
    assert_eq!(stats.test.total, 1741 + 871 + 1607);
    let text = stats.to_text();
    assert!(text.contains("21091"), "{text}");
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/stats.json")).unwrap())
            .unwrap();
    assert_eq!(on_disk["records"], 21_091);
}

#[test]
fn evaluate_after_overfitting_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("train.csv");
    write_csv(&csv, &keyword_corpus(30, 6, 3));
    let out = tmp.path().join("out");
    let config = RunConfig {
        train_path: Some(csv.clone()),
        test_path: Some(csv.clone()),
        output_dir: out.clone(),
        tokenizer: TokenizerMode::Whitespace,
        min_count: 1,
        maxlen: 8,
        pretrain_embeddings: false,
        epochs: 200,
        ..Default::default()
    };
    run_preprocess(&config).unwrap();
    let summary = run_train(&config).unwrap();
    assert_eq!(summary.evaluation.as_ref().unwrap().accuracy, 1.0);
    let report = run_evaluate(
        &out.join(model_dir_name(ModelKind::Lstm)),
        &csv,
        config.averaging,
    )
    .unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.total, 30);
}

#[test]
fn train_uses_stored_embeddings_and_writes_a_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("train.csv");
    write_csv(&csv, &keyword_corpus(45, 6, 4));
    let out = tmp.path().join("out");
    let mut config = small_config(&csv, &out);
    run_preprocess(&config).unwrap();
    let emb = run_train_embeddings(&config).unwrap();
    assert!(emb.pretrained);
    for kind in [
        ModelKind::Lstm,
        ModelKind::Rnn,
        ModelKind::NaiveBayes,
        ModelKind::Logreg,
    ] {
        config.model = kind;
        let s = run_train(&config).unwrap();
        assert_eq!(s.kind, kind);
        assert!(s.evaluation.is_some());
        let ckpt = restore(&out.join(model_dir_name(kind))).unwrap();
        assert_eq!(ckpt.manifest.kind, kind);
        assert!(ckpt.manifest.config.get("output_dir").is_none());
        let p = predict_text(&ckpt, "w1 great w2").unwrap();
        let sum = p.probabilities.negative + p.probabilities.neutral + p.probabilities.positive;
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn zero_weight_model_predicts_uniform_probabilities() {
    let tmp = tempfile::tempdir().unwrap();
    let names: Vec<String> = ["好", "坏", "一般"].iter().map(|s| s.to_string()).collect();
    let vocab = Vocabulary::build([names], 1).unwrap();
    let emb = EmbeddingMatrix::random(
        &vocab,
        4,
        0.5,
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1),
    );
    let model = Model::Lstm(LstmParams::zeros(3, 4, 3));
    let info = RunInfo {
        seed: 0,
        maxlen: 10,
        tokenizer: TokenizerMode::Character,
        config: serde_json::Value::Null,
    };
    checkpoint(tmp.path(), &model, Some(&emb), &vocab, &info).unwrap();
    let ckpt = restore(tmp.path()).unwrap();
    let p = predict_text(&ckpt, "今天天气好!").unwrap();
    for v in [
        p.probabilities.negative,
        p.probabilities.neutral,
        p.probabilities.positive,
    ] {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    assert!(p.to_text().contains("0.3333"));
    assert!(matches!(
        predict_text(&ckpt, "!!! ?"),
        Err(PipelineError::EmptyText)
    ));
}

#[test]
fn stale_preprocessing_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("train.csv");
    write_csv(&csv, &keyword_corpus(30, 6, 5));
    let out = tmp.path().join("out");
    let config = small_config(&csv, &out);
    run_preprocess(&config).unwrap();
    let changed = RunConfig {
        maxlen: 12,
        ..config
    };
    assert!(matches!(run_train(&changed), Err(PipelineError::Config(_))));
}

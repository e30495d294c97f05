//! End-to-end stages behind the command-line tool: preprocessing, embedding
//! pre-training, classifier training, evaluation, prediction and the
//! model comparison.
//!
//! Every stage is deterministic for a fixed [`RunConfig::seed`]; artifacts
//! contain no timings or absolute output paths, so repeated runs produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, feature_count, BaselineError, LogisticConfig};
use crate::corpus::{
    self, class_counts, encode_example, stratified_split, CorpusError, EncodedExample, RawRecord,
    Sentiment, TokenizerMode, Vocabulary,
};
use crate::embedding::{self, EmbeddingConfig, EmbeddingError, EmbeddingMatrix};
use crate::eval::{self, Averaging, ComparisonReport, ComparisonRow, EvalError, MetricsReport};
use crate::format;
use crate::nnet::{LstmParams, NnetError, RnnParams, DEFAULT_HIDDEN};
use crate::train::{
    self, CheckpointError, Model, ModelKind, OptimizerKind, RunInfo, TrainConfig, TrainError,
    TrainReport,
};

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "SENTI_OUTPUT_DIR";

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const STATS_FILE: &str = "stats.json";
pub const EMBEDDING_FILE: &str = "embeddings.bin";
pub const COMPARE_DIR: &str = "compare";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no records in {}", .0.display())]
    NoRecords(PathBuf),
    #[error("no {0} configured")]
    MissingInput(&'static str),
    #[error("text has no tokens after cleaning")]
    EmptyText,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Every knob of a run. Defaults are the reference hyperparameters
/// where they exist (embedding dim 100, window 7, min count 10, 10
/// embedding iterations, 4 epochs, maxlen 100).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train_path: Option<PathBuf>,
    /// Held-out set; without it the training file is split.
    pub test_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub test_fraction: f64,
    pub tokenizer: TokenizerMode,
    pub maxlen: usize,
    pub min_count: u64,

    pub embedding_dim: usize,
    pub window: usize,
    pub iterations: usize,
    pub negatives: usize,
    pub embedding_learning_rate: f64,
    pub dynamic_window: bool,
    /// Skip-gram pre-training; otherwise embeddings start uniform random.
    pub pretrain_embeddings: bool,

    pub model: ModelKind,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: Option<f64>,
    pub shuffle: bool,
    pub clip_norm: Option<f64>,
    pub train_embeddings: bool,

    pub nb_alpha: f64,
    pub logreg_l2: f64,
    pub logreg_learning_rate: f64,
    pub logreg_iterations: usize,
    pub sublinear_tf: bool,

    pub averaging: Averaging,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let emb = EmbeddingConfig::default();
        let tr = TrainConfig::default();
        let lr = LogisticConfig::default();
        RunConfig {
            train_path: None,
            test_path: None,
            output_dir: PathBuf::from("senti-out"),
            test_fraction: 0.2,
            tokenizer: TokenizerMode::default(),
            maxlen: 100,
            min_count: emb.min_count,
            embedding_dim: emb.dim,
            window: emb.window,
            iterations: emb.iterations,
            negatives: emb.negatives,
            embedding_learning_rate: emb.learning_rate,
            dynamic_window: emb.dynamic_window,
            pretrain_embeddings: true,
            model: ModelKind::Lstm,
            hidden: DEFAULT_HIDDEN,
            epochs: tr.epochs,
            batch_size: tr.batch_size,
            optimizer: tr.optimizer,
            learning_rate: tr.learning_rate,
            shuffle: tr.shuffle,
            clip_norm: tr.clip_norm,
            train_embeddings: tr.train_embeddings,
            nb_alpha: 1.0,
            logreg_l2: lr.l2,
            logreg_learning_rate: lr.learning_rate,
            logreg_iterations: lr.iterations,
            sublinear_tf: lr.sublinear_tf,
            averaging: Averaging::Macro,
            seed: 0,
        }
    }
}

/// Independent seed streams derived from the run seed.
#[derive(Clone, Copy, Debug)]
enum Stream {
    Split = 1,
    Embedding = 2,
    Init = 3,
    Shuffle = 4,
}

fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

impl RunConfig {
    /// Layers `overrides` (flag values) over the JSON config file at
    /// `file` over the defaults. `output_dir_env` sits between flags and
    /// the file.
    pub fn resolve(
        file: Option<&Path>,
        output_dir_env: Option<&str>,
        overrides: serde_json::Map<String, serde_json::Value>,
    ) -> Result<Self> {
        let mut merged = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                match serde_json::from_str::<serde_json::Value>(&text)? {
                    serde_json::Value::Object(m) => m,
                    _ => {
                        return Err(PipelineError::Config(
                            "config file must hold a JSON object".into(),
                        ))
                    }
                }
            }
            None => serde_json::Map::new(),
        };
        if let Some(dir) = output_dir_env.filter(|d| !d.is_empty()) {
            merged.insert("output_dir".into(), dir.into());
        }
        merged.extend(overrides);
        let config: RunConfig = serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::Config(m));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.maxlen == 0 {
            return fail("maxlen must be at least 1".into());
        }
        if self.hidden == 0 {
            return fail("hidden must be at least 1".into());
        }
        if !(self.nb_alpha.is_finite() && self.nb_alpha > 0.0) {
            return fail("nb_alpha must be positive".into());
        }
        self.embedding_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.embedding_dim,
            window: self.window,
            min_count: self.min_count,
            iterations: self.iterations,
            negatives: self.negatives,
            learning_rate: self.embedding_learning_rate,
            seed: derive_seed(self.seed, Stream::Embedding),
            dynamic_window: self.dynamic_window,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            seed: derive_seed(self.seed, Stream::Shuffle),
            shuffle: self.shuffle,
            clip_norm: self.clip_norm,
            train_embeddings: self.train_embeddings,
        }
    }

    pub fn logistic_config(&self) -> LogisticConfig {
        LogisticConfig {
            l2: self.logreg_l2,
            learning_rate: self.logreg_learning_rate,
            iterations: self.logreg_iterations,
            sublinear_tf: self.sublinear_tf,
        }
    }

    /// The configuration as recorded in manifests: everything except the
    /// output location.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            m.remove("output_dir");
        }
        v
    }

    fn run_info(&self) -> RunInfo {
        RunInfo {
            seed: self.seed,
            maxlen: self.maxlen,
            tokenizer: self.tokenizer,
            config: self.echo(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub negative: usize,
    pub neutral: usize,
    pub positive: usize,
    pub total: usize,
}

impl ClassCounts {
    pub fn of(examples: &[EncodedExample]) -> Self {
        let [negative, neutral, positive] = class_counts(examples.iter().map(|e| &e.label));
        ClassCounts {
            negative,
            neutral,
            positive,
            total: examples.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Records read, before dropping empty ones.
    pub records: usize,
    /// Records whose text had no tokens after cleaning.
    pub dropped_empty: usize,
    pub train: ClassCounts,
    pub test: ClassCounts,
    /// Examples longer than `maxlen`.
    pub truncated: usize,
    pub mean_tokens: f64,
    pub vocabulary: usize,
    pub maxlen: usize,
    pub tokenizer: TokenizerMode,
}

impl DatasetStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = |name: &str, k: &ClassCounts| {
            format!(
                "{name:<6} negative {:>7}  neutral {:>7}  positive {:>7}  total {:>7}\n",
                k.negative, k.neutral, k.positive, k.total
            )
        };
        out.push_str(&format!(
            "records: {} ({} dropped as empty)\n",
            self.records, self.dropped_empty
        ));
        out.push_str(&c("train", &self.train));
        out.push_str(&c("test", &self.test));
        out.push_str(&format!(
            "vocabulary: {} rows, maxlen {}, {} truncated, {:.2} mean tokens, {} tokenizer\n",
            self.vocabulary, self.maxlen, self.truncated, self.mean_tokens, self.tokenizer
        ));
        out
    }
}

/// Train and test sets encoded against a vocabulary built on the
/// training side only.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub train: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
    pub stats: DatasetStats,
}

fn tokenized(records: &[RawRecord], mode: TokenizerMode) -> (Vec<(Vec<String>, Sentiment)>, usize) {
    let mut out = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for r in records {
        let tokens = corpus::preprocess(&r.text, &mode);
        if tokens.is_empty() {
            dropped += 1;
        } else {
            out.push((tokens, r.label));
        }
    }
    (out, dropped)
}

/// Cleans, tokenizes and encodes; splits `train` when no test set is given.
pub fn prepare(
    train: &[RawRecord],
    test: Option<&[RawRecord]>,
    config: &RunConfig,
) -> Result<Prepared> {
    config.validate()?;
    let (train_tok, mut dropped) = tokenized(train, config.tokenizer);
    let (train_tok, test_tok) = match test {
        Some(t) => {
            let (tok, d) = tokenized(t, config.tokenizer);
            dropped += d;
            (train_tok, tok)
        }
        None => stratified_split(
            &train_tok,
            |(_, l)| *l,
            config.test_fraction,
            derive_seed(config.seed, Stream::Split),
        )?,
    };
    let vocab = Vocabulary::build(train_tok.iter().map(|(t, _)| t), config.min_count)?;
    let encode = |set: &[(Vec<String>, Sentiment)]| {
        set.iter()
            .map(|(t, l)| encode_example(t, *l, &vocab, config.maxlen))
            .collect::<std::result::Result<Vec<_>, _>>()
    };
    let train_ex = encode(&train_tok)?;
    let test_ex = encode(&test_tok)?;
    let all = train_tok.iter().chain(&test_tok);
    let n = train_tok.len() + test_tok.len();
    let stats = DatasetStats {
        records: train.len() + test.map_or(0, |t| t.len()),
        dropped_empty: dropped,
        train: ClassCounts::of(&train_ex),
        test: ClassCounts::of(&test_ex),
        truncated: all.clone().filter(|(t, _)| t.len() > config.maxlen).count(),
        mean_tokens: if n == 0 {
            0.0
        } else {
            all.map(|(t, _)| t.len()).sum::<usize>() as f64 / n as f64
        },
        vocabulary: vocab.len(),
        maxlen: config.maxlen,
        tokenizer: config.tokenizer,
    };
    Ok(Prepared {
        vocab,
        train: train_ex,
        test: test_ex,
        stats,
    })
}

/// Skip-gram embeddings over the training sequences, or a uniform random
/// matrix in `±1/√dim` when pre-training is off.
pub fn initial_embedding(
    train: &[EncodedExample],
    vocab: &Vocabulary,
    config: &RunConfig,
) -> Result<EmbeddingMatrix> {
    let emb_config = config.embedding_config();
    if config.pretrain_embeddings {
        let corpus: Vec<Vec<usize>> = train.iter().map(|e| e.tokens().to_vec()).collect();
        Ok(embedding::train_skipgram(&corpus, &emb_config, vocab)?)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(emb_config.seed);
        let bound = 1.0 / (emb_config.dim as f64).sqrt();
        Ok(EmbeddingMatrix::random(
            vocab,
            emb_config.dim,
            bound,
            &mut rng,
        ))
    }
}

/// A trained model plus its (possibly fine-tuned) embedding.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: Model,
    pub embedding: Option<EmbeddingMatrix>,
    pub report: Option<TrainReport>,
}

/// Trains one model kind. Sequence models start from `embedding`.
pub fn fit(
    kind: ModelKind,
    train_set: &[EncodedExample],
    vocab: &Vocabulary,
    embedding: &EmbeddingMatrix,
    config: &RunConfig,
) -> Result<Fitted> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, Stream::Init));
    let tc = config.train_config();
    let dim = embedding.dim();
    let features = feature_count(vocab.len());
    Ok(match kind {
        ModelKind::Lstm => {
            let params = LstmParams::init(config.hidden, dim, Sentiment::COUNT, &mut rng);
            let t = train::train(train_set, &tc, params, embedding.clone())?;
            Fitted {
                model: Model::Lstm(t.model),
                embedding: Some(t.embedding),
                report: Some(t.report),
            }
        }
        ModelKind::Rnn => {
            let params = RnnParams::init(config.hidden, dim, Sentiment::COUNT, &mut rng);
            let t = baselines::rnn_classifier_train(train_set, &tc, params, embedding.clone())?;
            Fitted {
                model: Model::Rnn(t.model),
                embedding: Some(t.embedding),
                report: Some(t.report),
            }
        }
        ModelKind::NaiveBayes => Fitted {
            model: Model::NaiveBayes(baselines::nb_fit(train_set, features, config.nb_alpha)?),
            embedding: None,
            report: None,
        },
        ModelKind::Logreg => Fitted {
            model: Model::Logistic(baselines::logreg_fit(
                train_set,
                features,
                &config.logistic_config(),
            )?),
            embedding: None,
            report: None,
        },
    })
}

/// Rounds a fitted model to storage precision so that in-memory
/// evaluation and a restored bundle agree exactly.
pub fn quantize(fitted: &mut Fitted) {
    fitted.model.quantize();
    if let Some(e) = fitted.embedding.as_mut() {
        e.quantize();
    }
}

pub fn predict_all(
    model: &Model,
    embedding: Option<&EmbeddingMatrix>,
    examples: &[EncodedExample],
) -> Result<Vec<Sentiment>> {
    examples
        .iter()
        .map(|e| {
            let p = model.predict_proba(embedding, &e.indices)?;
            Ok(Sentiment::from_index(crate::linalg::argmax(&p)).expect("three classes"))
        })
        .collect()
}

pub fn evaluate_examples(
    model: &Model,
    embedding: Option<&EmbeddingMatrix>,
    examples: &[EncodedExample],
    averaging: Averaging,
) -> Result<MetricsReport> {
    let predicted = predict_all(model, embedding, examples)?;
    let actual: Vec<Sentiment> = examples.iter().map(|e| e.label).collect();
    Ok(eval::evaluate(&actual, &predicted, averaging)?)
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        io(parent, fs::create_dir_all(parent))?;
    }
    io(path, format::write_atomic(path, bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let records = corpus::load_dataset(path).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    if records.is_empty() {
        return Err(PipelineError::NoRecords(path.to_path_buf()));
    }
    Ok(records)
}

fn load_inputs(config: &RunConfig) -> Result<Prepared> {
    let train_path = config
        .train_path
        .as_deref()
        .ok_or(PipelineError::MissingInput("train_path"))?;
    let train = read_records(train_path)?;
    let test = config.test_path.as_deref().map(read_records).transpose()?;
    prepare(&train, test.as_deref(), config)
}

fn write_encoded_file(path: &Path, examples: &[EncodedExample]) -> Result<()> {
    let mut buf = Vec::new();
    corpus::write_encoded(&mut buf, examples)?;
    write_file(path, &buf)
}

fn read_encoded_file(path: &Path) -> Result<Vec<EncodedExample>> {
    let f = io(path, fs::File::open(path))?;
    corpus::read_encoded(f).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the vocabulary, encoded train/test sets and dataset statistics
/// into the output directory.
pub fn run_preprocess(config: &RunConfig) -> Result<DatasetStats> {
    let prepared = load_inputs(config)?;
    let out = &config.output_dir;
    write_file(&out.join(VOCAB_FILE), prepared.vocab.to_text().as_bytes())?;
    write_encoded_file(&out.join(TRAIN_FILE), &prepared.train)?;
    write_encoded_file(&out.join(TEST_FILE), &prepared.test)?;
    write_json(&out.join(STATS_FILE), &prepared.stats)?;
    Ok(prepared.stats)
}

struct Preprocessed {
    vocab: Vocabulary,
    train: Vec<EncodedExample>,
    test: Vec<EncodedExample>,
}

fn load_preprocessed(config: &RunConfig) -> Result<Preprocessed> {
    let out = &config.output_dir;
    let vocab_path = out.join(VOCAB_FILE);
    let vocab = Vocabulary::load(&vocab_path).map_err(|source| PipelineError::Read {
        path: vocab_path,
        source,
    })?;
    let stats_path = out.join(STATS_FILE);
    let stats_text = io(&stats_path, fs::read_to_string(&stats_path))?;
    let stats: DatasetStats = serde_json::from_str(&stats_text)?;
    if stats.tokenizer != config.tokenizer {
        // A bundle records the tokenizer used at prediction time, so it must
        // be the one the vocabulary was built with.
        return Err(PipelineError::Config(format!(
            "data was preprocessed with the {} tokenizer, config says {}",
            stats.tokenizer, config.tokenizer
        )));
    }
    let train = read_encoded_file(&out.join(TRAIN_FILE))?;
    let test_path = out.join(TEST_FILE);
    let test = if test_path.exists() {
        read_encoded_file(&test_path)?
    } else {
        Vec::new()
    };
    for ex in train.iter().chain(&test) {
        if ex.indices.len() != config.maxlen {
            return Err(PipelineError::Config(format!(
                "encoded sequences have length {}, config maxlen is {}",
                ex.indices.len(),
                config.maxlen
            )));
        }
    }
    Ok(Preprocessed { vocab, train, test })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub rows: usize,
    pub dim: usize,
    pub pretrained: bool,
    pub sha256: String,
}

/// Trains embeddings on the preprocessed training set.
pub fn run_train_embeddings(config: &RunConfig) -> Result<EmbeddingSummary> {
    let data = load_preprocessed(config)?;
    let emb = initial_embedding(&data.train, &data.vocab, config)?;
    let bytes = emb.to_bytes()?;
    write_file(&config.output_dir.join(EMBEDDING_FILE), &bytes)?;
    Ok(EmbeddingSummary {
        rows: emb.rows(),
        dim: emb.dim(),
        pretrained: config.pretrain_embeddings,
        sha256: hex::encode(format::sha256(&bytes)),
    })
}

pub fn model_dir_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Lstm => "model-lstm",
        ModelKind::Rnn => "model-rnn",
        ModelKind::NaiveBayes => "model-naive-bayes",
        ModelKind::Logreg => "model-logreg",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub bundle: String,
    pub training: Option<TrainReport>,
    /// Held-out metrics when a test set was preprocessed.
    pub evaluation: Option<MetricsReport>,
}

/// Trains `config.model` on the preprocessed data and writes a bundle to
/// `<output_dir>/model-<kind>`. Uses `embeddings.bin` when present.
pub fn run_train(config: &RunConfig) -> Result<TrainSummary> {
    let data = load_preprocessed(config)?;
    let emb_path = config.output_dir.join(EMBEDDING_FILE);
    let embedding = if emb_path.exists() {
        let e = EmbeddingMatrix::load(&emb_path)?;
        e.check_vocabulary(&data.vocab)?;
        e
    } else {
        initial_embedding(&data.train, &data.vocab, config)?
    };
    let mut fitted = fit(config.model, &data.train, &data.vocab, &embedding, config)?;
    quantize(&mut fitted);
    let evaluation = if data.test.is_empty() {
        None
    } else {
        Some(evaluate_examples(
            &fitted.model,
            fitted.embedding.as_ref(),
            &data.test,
            config.averaging,
        )?)
    };
    let name = model_dir_name(config.model);
    train::checkpoint(
        &config.output_dir.join(name),
        &fitted.model,
        fitted.embedding.as_ref(),
        &data.vocab,
        &config.run_info(),
    )?;
    let mut training = fitted.report;
    if let Some(r) = training.as_mut() {
        r.evaluation = evaluation.clone();
    }
    let summary = TrainSummary {
        kind: config.model,
        bundle: name.to_string(),
        training,
        evaluation,
    };
    write_json(
        &config.output_dir.join(format!(
            "train-report-{}.json",
            name.trim_start_matches("model-")
        )),
        &summary,
    )?;
    Ok(summary)
}

/// Encodes labeled raw records with a bundle's own vocabulary, tokenizer
/// and maxlen. Records without tokens are skipped.
pub fn encode_with_bundle(
    checkpoint: &train::Checkpoint,
    records: &[RawRecord],
) -> Result<Vec<EncodedExample>> {
    let (tok, _) = tokenized(records, checkpoint.manifest.tokenizer);
    Ok(tok
        .iter()
        .map(|(t, l)| encode_example(t, *l, &checkpoint.vocab, checkpoint.manifest.maxlen))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Scores a bundle on a labeled CSV.
pub fn run_evaluate(model_dir: &Path, input: &Path, averaging: Averaging) -> Result<MetricsReport> {
    let ckpt = train::restore(model_dir)?;
    let records = read_records(input)?;
    let examples = encode_with_bundle(&ckpt, &records)?;
    if examples.is_empty() {
        return Err(PipelineError::NoRecords(input.to_path_buf()));
    }
    evaluate_examples(&ckpt.model, ckpt.embedding.as_ref(), &examples, averaging)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Sentiment,
    pub probabilities: ClassProbabilities,
    pub tokens: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub negative: f64,
    pub neutral: f64,
    pub positive: f64,
}

impl Prediction {
    pub fn to_text(&self) -> String {
        let p = &self.probabilities;
        format!(
            "{}\tnegative={:.4} neutral={:.4} positive={:.4}\n",
            self.label, p.negative, p.neutral, p.positive
        )
    }
}

/// Clean → tokenize → encode → forward for one raw text.
pub fn predict_text(checkpoint: &train::Checkpoint, text: &str) -> Result<Prediction> {
    let tokens = corpus::preprocess(text, &checkpoint.manifest.tokenizer);
    if tokens.is_empty() {
        return Err(PipelineError::EmptyText);
    }
    let indices = corpus::encode(&tokens, &checkpoint.vocab, checkpoint.manifest.maxlen)?;
    let p = checkpoint.predict_proba(&indices)?;
    Ok(Prediction {
        label: Sentiment::from_index(crate::linalg::argmax(&p)).expect("three classes"),
        probabilities: ClassProbabilities {
            negative: p[0],
            neutral: p[1],
            positive: p[2],
        },
        tokens: tokens.len().min(checkpoint.manifest.maxlen),
    })
}

pub const COMPARED: [ModelKind; 4] = [
    ModelKind::Lstm,
    ModelKind::Rnn,
    ModelKind::NaiveBayes,
    ModelKind::Logreg,
];

/// Trains the LSTM, RNN, Naive Bayes and logistic regression models on
/// one split and scores each on the held-out side.
pub fn compare_prepared(
    prepared: &Prepared,
    config: &RunConfig,
) -> Result<(ComparisonReport, Vec<Fitted>)> {
    if prepared.test.is_empty() {
        return Err(PipelineError::MissingInput("test examples"));
    }
    let embedding = initial_embedding(&prepared.train, &prepared.vocab, config)?;
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for kind in COMPARED {
        log::info!("training {}", kind.display_name());
        let mut fitted = fit(kind, &prepared.train, &prepared.vocab, &embedding, config)?;
        quantize(&mut fitted);
        let metrics = evaluate_examples(
            &fitted.model,
            fitted.embedding.as_ref(),
            &prepared.test,
            config.averaging,
        )?;
        rows.push(ComparisonRow {
            model: kind.display_name().to_string(),
            metrics,
        });
        models.push(fitted);
    }
    Ok((
        ComparisonReport {
            averaging: config.averaging,
            rows,
        },
        models,
    ))
}

/// [`compare_prepared`] from the configured CSV files, writing the report,
/// dataset statistics and one bundle per model under
/// `<output_dir>/compare`.
pub fn run_compare(config: &RunConfig) -> Result<ComparisonReport> {
    let prepared = load_inputs(config)?;
    let (report, models) = compare_prepared(&prepared, config)?;
    let dir = config.output_dir.join(COMPARE_DIR);
    write_json(&dir.join(STATS_FILE), &prepared.stats)?;
    for (kind, fitted) in COMPARED.iter().zip(&models) {
        train::checkpoint(
            &dir.join(model_dir_name(*kind)),
            &fitted.model,
            fitted.embedding.as_ref(),
            &prepared.vocab,
            &config.run_info(),
        )?;
    }
    write_file(
        &dir.join("report.json"),
        (report.to_json() + "\n").as_bytes(),
    )?;
    write_file(&dir.join("report.txt"), report.to_text().as_bytes())?;
    Ok(report)
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "senti",
    version,
    about = "Three-class sentiment analysis with an LSTM and baselines"
)]
pub struct Cli {
    /// JSON file with run settings; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, tokenize and encode a labeled CSV; writes the vocabulary,
    /// encoded train/test files and class statistics.
    Preprocess {
        /// Labeled `label,text` CSV (same as --train-path).
        input: Option<PathBuf>,
    },
    /// Pre-train skip-gram embeddings on the preprocessed training set.
    TrainEmbeddings,
    /// Train the configured model and write a checkpoint bundle.
    Train,
    /// Score a checkpoint on a labeled CSV.
    Evaluate {
        /// Bundle directory; defaults to the configured model's bundle in
        /// the output directory.
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
        /// Labeled CSV; defaults to --test-path.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Classify raw text given as an argument, or each line of stdin.
    Predict {
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
        text: Option<String>,
    },
    /// Train LSTM, RNN, Naive Bayes and logistic regression on one split
    /// and print the metric table.
    Compare,
    /// Write a synthetic labeled corpus for experiments.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::LongRange)]
        kind: SynthKind,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Tokens per document (keyword corpus only).
        #[arg(long, default_value_t = 6)]
        length: usize,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// One keyword decides the label.
    Keyword,
    /// The first of three markers decides the label; the other two sit
    /// near the end.
    LongRange,
}

/// One flag per configuration field. Only flags actually given end up in
/// the serialized map.
#[derive(Debug, Default, Args, Serialize)]
pub struct Overrides {
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_path: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[arg(long, global = true, value_parser = ["whitespace", "character", "presegmented"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maxlen: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_count: Option<u64>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negatives: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_learning_rate: Option<f64>,
    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamic_window: Option<bool>,
    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_embeddings: Option<bool>,

    #[arg(long, global = true, value_parser = ["lstm", "rnn", "naive_bayes", "logreg"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long, global = true, value_parser = ["sgd", "adam"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<bool>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_embeddings: Option<bool>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nb_alpha: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logreg_l2: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logreg_learning_rate: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logreg_iterations: Option<usize>,
    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sublinear_tf: Option<bool>,

    #[arg(long, global = true, value_parser = ["macro", "micro", "weighted"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averaging: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn to_map(&self) -> serde_json::Map<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("overrides serialize to an object"),
        }
    }
}

/// Rewrites `--snake_case` flag names to `--kebab-case` so config keys
/// work verbatim on the command line. Stops at a bare `--`.
pub fn normalize_flags<I: IntoIterator<Item = std::ffi::OsString>>(
    args: I,
) -> Vec<std::ffi::OsString> {
    let mut done = false;
    args.into_iter()
        .map(|a| {
            if done {
                return a;
            }
            match a.to_str() {
                Some("--") => {
                    done = true;
                    a
                }
                Some(s) if s.starts_with("--") => {
                    let (name, rest) = s.split_at(s.find('=').unwrap_or(s.len()));
                    format!("{}{rest}", name.replace('_', "-")).into()
                }
                _ => a,
            }
        })
        .collect()
}

//! Dataset ingestion and text preprocessing: cleaning, tokenization,
//! vocabulary construction and fixed-length encoding.

mod clean;
mod dataset;
mod tokenize;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean_text, is_punctuation};
pub use dataset::{
    class_counts, load_dataset, read_dataset, read_encoded, stratified_split, write_dataset,
    write_encoded,
};
pub use tokenize::{tokenize, Tokenizer, TokenizerMode};
pub use vocab::{Vocabulary, PAD_INDEX, RESERVED, UNK_INDEX};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: malformed record: {message}")]
    MalformedRow { row: u64, message: String },
    #[error("row {row}: unknown label {value:?} (expected 0/1/2 or negative/neutral/positive)")]
    UnknownLabel { row: u64, value: String },
    #[error("unknown label {0:?}")]
    BadLabel(String),
    #[error("unknown tokenizer mode {0:?}")]
    UnknownTokenizer(String),
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("maxlen must be at least 1")]
    InvalidMaxlen,
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("class {0} has fewer than 2 examples; cannot stratify")]
    ClassTooSmall(Sentiment),
    #[error("vocabulary line {line}: {message}")]
    VocabFormat { line: usize, message: String },
    #[error("token {0:?} contains a tab or newline and cannot be stored")]
    UnstorableToken(String),
}

/// Three-way sentiment label; the discriminant is the class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sentiment {
    type Err = CorpusError;

    /// Accepts `0`/`1`/`2` or the lowercase class names, nothing else.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0" | "negative" => Ok(Sentiment::Negative),
            "1" | "neutral" => Ok(Sentiment::Neutral),
            "2" | "positive" => Ok(Sentiment::Positive),
            other => Err(CorpusError::BadLabel(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub text: String,
    pub label: Sentiment,
}

impl RawRecord {
    pub fn new(text: impl Into<String>, label: Sentiment) -> Self {
        RawRecord {
            text: text.into(),
            label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    /// Exactly `maxlen` indices, pad-suffixed.
    pub indices: Vec<usize>,
    pub label: Sentiment,
    /// Token count before padding, capped at `maxlen`.
    pub original_length: usize,
}

impl EncodedExample {
    /// The unpadded prefix.
    pub fn tokens(&self) -> &[usize] {
        &self.indices[..self.original_length]
    }
}

/// Maps tokens to indices (unknown → [`UNK_INDEX`]), keeps the first
/// `maxlen`, and right-pads with [`PAD_INDEX`].
pub fn encode<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    maxlen: usize,
) -> Result<Vec<usize>, CorpusError> {
    if maxlen == 0 {
        return Err(CorpusError::InvalidMaxlen);
    }
    let mut out: Vec<usize> = tokens
        .iter()
        .take(maxlen)
        .map(|t| vocab.index_or_unk(t.as_ref()))
        .collect();
    out.resize(maxlen, PAD_INDEX);
    Ok(out)
}

pub fn encode_example<S: AsRef<str>>(
    tokens: &[S],
    label: Sentiment,
    vocab: &Vocabulary,
    maxlen: usize,
) -> Result<EncodedExample, CorpusError> {
    Ok(EncodedExample {
        indices: encode(tokens, vocab, maxlen)?,
        label,
        original_length: tokens.len().min(maxlen),
    })
}

/// Cleans and tokenizes a raw text in one go.
pub fn preprocess(raw: &str, tokenizer: &dyn Tokenizer) -> Vec<String> {
    tokenizer.tokenize(&clean_text(raw))
}

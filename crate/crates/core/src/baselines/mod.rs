//! Bag-of-words reference classifiers and the vanilla-RNN sequence
//! classifier used in the model comparison.
//!
//! Bag-of-words features are indexed by token index minus one: the padding
//! index never contributes, so feature `f` is vocabulary index `f + 1` and a
//! vocabulary of `n` rows yields `n - 1` features (unknown token included).

mod logistic;
mod naive_bayes;
mod tfidf;

use thiserror::Error;

use crate::corpus::{EncodedExample, Sentiment, PAD_INDEX};
use crate::embedding::EmbeddingMatrix;
use crate::nnet::RnnParams;
use crate::train::{self, TrainConfig, TrainError, Trained};

pub use logistic::{
    logreg_fit, logreg_fit_features, logreg_predict, LogisticConfig, LogisticModel,
    LogisticObjective, LogisticParams,
};
pub use naive_bayes::{nb_fit, nb_predict, NaiveBayesModel};
pub use tfidf::{tfidf_fit, tfidf_transform, TfidfModel, TfidfNorm};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("no training documents")]
    Empty,
    #[error("{documents} documents but {labels} labels")]
    LengthMismatch { documents: usize, labels: usize },
    #[error("token index {index} outside the {features}-feature space")]
    FeatureOutOfRange { index: usize, features: usize },
    #[error("class {0} has no training documents")]
    MissingClass(Sentiment),
    #[error("invalid baseline config: {0}")]
    Config(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

/// Sparse vector as `(feature, value)` pairs sorted by feature.
pub type SparseVector = Vec<(usize, f64)>;

/// Term counts of one encoded document in feature space.
pub fn term_counts(indices: &[usize], features: usize) -> Result<SparseVector, BaselineError> {
    let mut sorted: Vec<usize> = Vec::with_capacity(indices.len());
    for &i in indices {
        if i == PAD_INDEX {
            continue;
        }
        let f = i - 1;
        if f >= features {
            return Err(BaselineError::FeatureOutOfRange { index: i, features });
        }
        sorted.push(f);
    }
    sorted.sort_unstable();
    let mut out: SparseVector = Vec::new();
    for f in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == f => *c += 1.0,
            _ => out.push((f, 1.0)),
        }
    }
    Ok(out)
}

/// Feature count for a vocabulary of `vocab_len` rows.
pub fn feature_count(vocab_len: usize) -> usize {
    vocab_len.saturating_sub(1)
}

/// Trains the Elman RNN classifier with the same loop, optimizer and
/// embedding handling as the LSTM.
pub fn rnn_classifier_train(
    examples: &[EncodedExample],
    config: &TrainConfig,
    model: RnnParams,
    embedding: EmbeddingMatrix,
) -> Result<Trained<RnnParams>, TrainError> {
    train::train(examples, config, model, embedding)
}

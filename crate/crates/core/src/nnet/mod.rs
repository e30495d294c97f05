//! Recurrent sequence classifiers with hand-written backpropagation through
//! time.
//!
//! Both models embed each token, run a recurrent cell over the non-padding
//! timesteps, feed the final hidden state through a dense layer and
//! normalize with softmax. Padding positions are masked: they leave the
//! recurrent state untouched and produce no trace entry.

mod lstm;
mod rnn;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::linalg::{self, Matrix};

/// Hidden width used when none is configured.
pub const DEFAULT_HIDDEN: usize = 50;

pub use lstm::{lstm_step, LstmParams, LstmState, LstmStepCache, LstmTrace};
pub use rnn::{rnn_step, RnnParams, RnnStepCache, RnnTrace};

#[derive(Debug, Error, PartialEq)]
pub enum NnetError {
    #[error("empty sequence after masking")]
    EmptySequence,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("token index {index} out of range for embedding with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// Cached forward pass of a sequence classifier.
pub trait ForwardTrace {
    fn logits(&self) -> &[f64];
    fn probabilities(&self) -> &[f64];
    /// Number of non-masked timesteps.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn loss(&self, label: usize) -> f64 {
        cross_entropy(self.logits(), label)
    }

    fn predicted(&self) -> usize {
        linalg::argmax(self.probabilities())
    }
}

/// A recurrent classifier whose parameters can be trained by gradient
/// descent. Tensors are exposed as flat slices in a fixed order so
/// optimizers and serializers can walk them generically.
pub trait SequenceModel: Clone + Send + Sync {
    type Trace: ForwardTrace + Send;

    fn classes(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn hidden_dim(&self) -> usize;

    fn forward(
        &self,
        embedding: &EmbeddingMatrix,
        indices: &[usize],
    ) -> Result<Self::Trace, NnetError>;

    /// Exact gradient of the cross-entropy loss for `label` with respect to
    /// every parameter and every embedding row the trace touched.
    fn backward(&self, trace: &Self::Trace, label: usize) -> Result<Gradients<Self>, NnetError>;

    /// Same-shaped parameters filled with zeros.
    fn zeros_like(&self) -> Self;

    fn tensor_names(&self) -> &'static [&'static str];
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

/// Parameter-shaped gradient plus sparse embedding-row gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<P> {
    pub params: P,
    /// Summed gradient per touched embedding row, keyed by token index.
    pub embedding: BTreeMap<usize, Vec<f64>>,
}

impl<P: SequenceModel> Gradients<P> {
    pub fn zeros(like: &P) -> Self {
        Gradients {
            params: like.zeros_like(),
            embedding: BTreeMap::new(),
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradients<P>, scale: f64) {
        for (dst, src) in self
            .params
            .tensors_mut()
            .into_iter()
            .zip(other.params.tensors())
        {
            linalg::axpy(scale, src, dst);
        }
        for (&row, g) in &other.embedding {
            let dst = self
                .embedding
                .entry(row)
                .or_insert_with(|| vec![0.0; g.len()]);
            linalg::axpy(scale, g, dst);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.params.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
        for g in self.embedding.values_mut() {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// L2 norm over all parameter and embedding-row entries.
    pub fn global_norm(&self) -> f64 {
        let params: f64 = self
            .params
            .tensors()
            .iter()
            .map(|t| linalg::dot(t, t))
            .sum();
        let emb: f64 = self.embedding.values().map(|g| linalg::dot(g, g)).sum();
        (params + emb).sqrt()
    }

    /// Rescales to `max_norm` when the global norm exceeds it. Returns the
    /// norm before clipping.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.params.tensors().iter().all(|t| linalg::all_finite(t))
            && self.embedding.values().all(|g| linalg::all_finite(g))
    }
}

/// `-ln softmax(logits)[label]`, via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    linalg::log_sum_exp(logits) - logits[label]
}

/// `-ln p[label]` for a probability vector already on the simplex.
pub fn loss(probabilities: &[f64], label: usize) -> f64 {
    -probabilities[label].ln()
}

pub(crate) fn check_label(label: usize, classes: usize) -> Result<(), NnetError> {
    if label >= classes {
        Err(NnetError::LabelOutOfRange { label, classes })
    } else {
        Ok(())
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<(), NnetError> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(NnetError::NonFinite(what))
    }
}

pub(crate) fn check_embedding(embedding: &EmbeddingMatrix, input: usize) -> Result<(), NnetError> {
    if embedding.dim() != input {
        return Err(NnetError::Shape(format!(
            "embedding dim {} but model input {}",
            embedding.dim(),
            input
        )));
    }
    Ok(())
}

pub(crate) fn embed(embedding: &EmbeddingMatrix, index: usize) -> Result<&[f64], NnetError> {
    if index >= embedding.rows() {
        return Err(NnetError::IndexOutOfRange {
            index,
            rows: embedding.rows(),
        });
    }
    Ok(embedding.row(index))
}

/// Dense output layer shared by both cells: logits, softmax, and the
/// gradient of cross-entropy back to the final hidden state.
pub(crate) fn head_forward(w: &Matrix, b: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut logits = vec![0.0; w.rows()];
    w.affine(h, b, &mut logits);
    let probs = linalg::softmax(&logits);
    (logits, probs)
}

/// Accumulates head gradients and returns `∂L/∂h_T`.
pub(crate) fn head_backward(
    w: &Matrix,
    probs: &[f64],
    h: &[f64],
    label: usize,
    grad_w: &mut Matrix,
    grad_b: &mut [f64],
) -> Vec<f64> {
    let mut dlogits = probs.to_vec();
    dlogits[label] -= 1.0;
    grad_w.add_outer(&dlogits, h);
    linalg::axpy(1.0, &dlogits, grad_b);
    let mut dh = vec![0.0; w.cols()];
    w.add_transpose_mul(&dlogits, &mut dh);
    dh
}

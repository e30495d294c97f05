//! Mini-batch training of the sequence classifiers.

mod checkpoint;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EncodedExample, Sentiment};
use crate::embedding::EmbeddingMatrix;
use crate::eval::MetricsReport;
use crate::nnet::{ForwardTrace, Gradients, NnetError, SequenceModel};

pub use checkpoint::{
    checkpoint, read_model_file, restore, write_model_file, Checkpoint, CheckpointError, FileEntry,
    Manifest, Model, ModelKind, RunInfo, BUNDLE_VERSION, EMBEDDING_FILE, MANIFEST_FILE, MODEL_FILE,
    MODEL_FILE_VERSION, VOCAB_FILE,
};
pub use optim::{adam_update, sgd_update, AdamHyper, AdamMoments, OptimizerKind};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("example {index}: {source}")]
    Example {
        index: usize,
        #[source]
        source: NnetError,
    },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: u64 },
    #[error(transparent)]
    Model(#[from] NnetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// `None` picks the optimizer's default.
    pub learning_rate: Option<f64>,
    pub seed: u64,
    pub shuffle: bool,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Update the embedding rows the batch touched.
    pub train_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 4,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: None,
            seed: 0,
            shuffle: true,
            clip_norm: Some(5.0),
            train_embeddings: true,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or_else(|| self.optimizer.default_learning_rate())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr > 0.0) {
            return fail("learning_rate must be positive");
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return fail("clip_norm must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
    pub steps: u64,
    /// Updates where the gradient norm exceeded `clip_norm`.
    pub clipped_steps: u64,
    /// Wall time; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub total_steps: u64,
    /// Held-out evaluation, filled in by the caller after training.
    pub evaluation: Option<MetricsReport>,
}

#[derive(Clone, Debug)]
pub struct Trained<M> {
    pub model: M,
    pub embedding: EmbeddingMatrix,
    pub report: TrainReport,
}

/// Optimizer state for the model tensors plus the embedding matrix.
enum OptimizerState {
    Sgd,
    Adam {
        hyper: AdamHyper,
        params: Vec<AdamMoments>,
        embedding: AdamMoments,
    },
}

impl OptimizerState {
    fn new<M: SequenceModel>(config: &TrainConfig, model: &M, embedding: &EmbeddingMatrix) -> Self {
        match config.optimizer {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                hyper: AdamHyper::new(config.learning_rate()),
                params: model
                    .tensors()
                    .iter()
                    .map(|t| AdamMoments::zeros(t.len()))
                    .collect(),
                embedding: AdamMoments::zeros(embedding.matrix().as_slice().len()),
            },
        }
    }

    fn apply<M: SequenceModel>(
        &mut self,
        step: u64,
        lr: f64,
        grads: &Gradients<M>,
        model: &mut M,
        embedding: Option<&mut EmbeddingMatrix>,
    ) {
        match self {
            OptimizerState::Sgd => {
                for (p, g) in model.tensors_mut().into_iter().zip(grads.params.tensors()) {
                    sgd_update(p, g, lr);
                }
                if let Some(emb) = embedding {
                    let m = emb.matrix_mut();
                    for (&row, g) in &grads.embedding {
                        sgd_update(m.row_mut(row), g, lr);
                    }
                }
            }
            OptimizerState::Adam {
                hyper,
                params,
                embedding: emb_moments,
            } => {
                for ((p, g), mo) in model
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.params.tensors())
                    .zip(params.iter_mut())
                {
                    adam_update(p, g, mo, step, hyper);
                }
                if let Some(emb) = embedding {
                    // Dense update: untouched rows see a zero gradient, so
                    // their moments decay as in a dense embedding layer. The
                    // padding row never receives gradient and stays zero.
                    let dense = dense_embedding_grad(emb, &grads.embedding);
                    adam_update(
                        emb.matrix_mut().as_mut_slice(),
                        &dense,
                        emb_moments,
                        step,
                        hyper,
                    );
                }
            }
        }
    }
}

fn dense_embedding_grad(
    emb: &EmbeddingMatrix,
    rows: &std::collections::BTreeMap<usize, Vec<f64>>,
) -> Vec<f64> {
    let dim = emb.dim();
    let mut dense = vec![0.0; emb.rows() * dim];
    for (&r, g) in rows {
        dense[r * dim..(r + 1) * dim].copy_from_slice(g);
    }
    dense
}

/// Trains `model` on `examples` with mini-batch gradient descent.
///
/// Each epoch visits every example once (shuffled when configured); each
/// batch's gradient is the mean of per-example gradients summed in batch
/// order, so results do not depend on the thread count. With `clip_norm`
/// set, the global norm (model tensors and embedding rows together) is
/// rescaled before the update.
pub fn train<M: SequenceModel>(
    examples: &[EncodedExample],
    config: &TrainConfig,
    mut model: M,
    mut embedding: EmbeddingMatrix,
) -> Result<Trained<M>, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    // Surface shape/empty-sequence problems before any update happens.
    for (index, ex) in examples.iter().enumerate() {
        model
            .forward(&embedding, &ex.indices)
            .map_err(|source| TrainError::Example { index, source })?;
    }

    let lr = config.learning_rate();
    let mut optimizer = OptimizerState::new(config, &model, &embedding);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport::default();
    let mut step = 0u64;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut clipped = 0u64;
        let steps_before = step;

        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<(f64, bool, Gradients<M>), NnetError>> = batch
                .par_iter()
                .map(|&i| {
                    let ex = &examples[i];
                    let label = ex.label.index();
                    let trace = model.forward(&embedding, &ex.indices)?;
                    let grads = model.backward(&trace, label)?;
                    Ok((trace.loss(label), trace.predicted() == label, grads))
                })
                .collect();

            step += 1;
            let scale = 1.0 / batch.len() as f64;
            let mut total = Gradients::zeros(&model);
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, hit, g) = r?;
                batch_loss += loss;
                correct += hit as usize;
                total.add_scaled(&g, scale);
            }
            if !batch_loss.is_finite() || !total.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, step });
            }
            loss_sum += batch_loss;
            if let Some(max) = config.clip_norm {
                if total.clip(max) > max {
                    clipped += 1;
                }
            }
            let emb = config.train_embeddings.then_some(&mut embedding);
            optimizer.apply(step, lr, &total, &mut model, emb);
        }

        let epoch_report = EpochReport {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            accuracy: correct as f64 / examples.len() as f64,
            steps: step - steps_before,
            clipped_steps: clipped,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, train accuracy {:.4}, {:.2}s",
            epoch_report.mean_loss,
            epoch_report.accuracy,
            epoch_report.seconds
        );
        report.epochs.push(epoch_report);
    }
    report.total_steps = step;
    Ok(Trained {
        model,
        embedding,
        report,
    })
}

/// Class probabilities for each example, in order.
pub fn predict_probabilities<M: SequenceModel>(
    model: &M,
    embedding: &EmbeddingMatrix,
    examples: &[EncodedExample],
) -> Result<Vec<Vec<f64>>, NnetError> {
    examples
        .par_iter()
        .map(|ex| {
            Ok(model
                .forward(embedding, &ex.indices)?
                .probabilities()
                .to_vec())
        })
        .collect()
}

pub fn predict_labels<M: SequenceModel>(
    model: &M,
    embedding: &EmbeddingMatrix,
    examples: &[EncodedExample],
) -> Result<Vec<Sentiment>, NnetError> {
    examples
        .par_iter()
        .map(|ex| {
            let trace = model.forward(embedding, &ex.indices)?;
            Ok(Sentiment::from_index(trace.predicted()).expect("three-class head"))
        })
        .collect()
}

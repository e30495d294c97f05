//! Skip-gram with negative sampling.
//!
//! Per (center `w`, context `c`) pair with sampled negatives `n_1..n_k` the
//! loss is
//!
//! ```text
//! L = -ln σ(u_c · v_w) - Σ_j ln σ(-u_{n_j} · v_w)
//! ```
//!
//! where `v` are center ("input") vectors and `u` context ("output")
//! vectors. Only the center vectors are kept as the embedding.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingConfig, EmbeddingError, EmbeddingMatrix};
use crate::corpus::{Vocabulary, RESERVED, UNK_INDEX};
use crate::linalg::{axpy, dot, log_sigmoid, sigmoid, Matrix};

/// Exponent applied to unigram counts for the noise distribution.
pub const NEGATIVE_SAMPLING_POWER: f64 = 0.75;

/// Skip-gram pairs for every sentence, in corpus order.
///
/// Reserved indices (padding, unknown) are dropped from each sentence before
/// windowing. With `dynamic` set, one window radius is drawn uniformly from
/// `[1, window]` per center position, in order, from a `ChaCha8Rng` seeded
/// with `seed`; otherwise every center uses `window`.
pub fn generate_pairs(
    corpus: &[Vec<usize>],
    window: usize,
    seed: u64,
    dynamic: bool,
) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    for sentence in corpus {
        filter_reserved(sentence, &mut scratch);
        sentence_pairs(&scratch, window, dynamic, &mut rng, |c, x| out.push((c, x)));
    }
    out
}

fn filter_reserved(sentence: &[usize], out: &mut Vec<usize>) {
    out.clear();
    out.extend(sentence.iter().copied().filter(|&i| i >= RESERVED));
}

fn sentence_pairs<R: Rng>(
    tokens: &[usize],
    window: usize,
    dynamic: bool,
    rng: &mut R,
    mut emit: impl FnMut(usize, usize),
) {
    let n = tokens.len();
    for p in 0..n {
        let w = if dynamic {
            rng.gen_range(1..=window)
        } else {
            window
        };
        let lo = p.saturating_sub(w);
        let hi = (p + w).min(n - 1);
        for q in lo..=hi {
            if q != p {
                emit(tokens[p], tokens[q]);
            }
        }
    }
}

/// Draws token indices with probability proportional to `count^0.75`.
/// Reserved indices are never drawn.
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Result<Self, EmbeddingError> {
        let weights: Vec<f64> = (RESERVED..vocab.len())
            .map(|i| (vocab.frequency_at(i) as f64).powf(NEGATIVE_SAMPLING_POWER))
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|_| EmbeddingError::VocabularyTooSmall(vocab.token_count()))?;
        let total: f64 = weights.iter().sum();
        let mut probs = vec![0.0; RESERVED];
        probs.extend(weights.iter().map(|w| w / total));
        Ok(NegativeSampler { dist, probs })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng) + RESERVED
    }

    /// Target probability of drawing `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.probs.get(index).copied().unwrap_or(0.0)
    }
}

/// Loss and gradients of one SGNS sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    /// `σ(u_c·v) - 1`: scale of the positive-pair terms.
    pub positive_coeff: f64,
    /// `σ(u_n·v)` per negative.
    pub negative_coeffs: Vec<f64>,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of the SGNS loss for one positive context and its
/// negatives.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let pos_score = dot(context, center);
    let positive_coeff = sigmoid(pos_score) - 1.0;
    let mut loss = -log_sigmoid(pos_score);

    let mut g_center: Vec<f64> = context.iter().map(|u| positive_coeff * u).collect();
    let g_context: Vec<f64> = center.iter().map(|v| positive_coeff * v).collect();

    let mut negative_coeffs = Vec::with_capacity(negatives.len());
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for &u in negatives {
        let score = dot(u, center);
        let coeff = sigmoid(score);
        loss -= log_sigmoid(-score);
        axpy(coeff, u, &mut g_center);
        g_negatives.push(center.iter().map(|v| coeff * v).collect());
        negative_coeffs.push(coeff);
    }

    SgnsGradient {
        loss,
        positive_coeff,
        negative_coeffs,
        center: g_center,
        context: g_context,
        negatives: g_negatives,
    }
}

struct StepScratch {
    center_grad: Vec<f64>,
    center: Vec<f64>,
    coeffs: Vec<f64>,
}

impl StepScratch {
    fn new(dim: usize) -> Self {
        StepScratch {
            center_grad: vec![0.0; dim],
            center: vec![0.0; dim],
            coeffs: Vec::new(),
        }
    }
}

/// One in-place SGD step on a pair; same math as [`sgns_gradient`] with
/// every gradient taken at the pre-step values. Returns the loss.
fn sgns_step(
    input: &mut Matrix,
    output: &mut Matrix,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut StepScratch,
) -> f64 {
    let StepScratch {
        center_grad,
        center: v_old,
        coeffs,
    } = scratch;
    let v = input.row(center);
    let pos_score = dot(output.row(context), v);
    let pos_coeff = sigmoid(pos_score) - 1.0;
    let mut loss = -log_sigmoid(pos_score);

    center_grad.fill(0.0);
    axpy(pos_coeff, output.row(context), center_grad);
    coeffs.clear();
    for &n in negatives {
        let score = dot(output.row(n), v);
        let c = sigmoid(score);
        loss -= log_sigmoid(-score);
        axpy(c, output.row(n), center_grad);
        coeffs.push(c);
    }

    // Context-side updates read the unchanged center vector.
    v_old.copy_from_slice(input.row(center));
    axpy(-lr * pos_coeff, v_old, output.row_mut(context));
    for (&n, &c) in negatives.iter().zip(coeffs.iter()) {
        axpy(-lr * c, v_old, output.row_mut(n));
    }
    axpy(-lr, center_grad, input.row_mut(center));
    loss
}

/// Trains center vectors over `corpus` (token-index sentences encoded
/// against `vocab`).
///
/// Runs `config.iterations` passes; the learning rate decays linearly from
/// `learning_rate` to 10% of it over all center positions. Negatives equal
/// to the context token are skipped. Padding and unknown never take part in
/// pairs, so the padding row stays zero and the unknown row is set to the
/// mean of the token rows afterwards.
pub fn train_skipgram(
    corpus: &[Vec<usize>],
    config: &EmbeddingConfig,
    vocab: &Vocabulary,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    config.validate()?;
    if vocab.token_count() < 2 {
        return Err(EmbeddingError::VocabularyTooSmall(vocab.token_count()));
    }
    let dim = config.dim;
    let rows = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let bound = 0.5 / dim as f64;
    let mut input = Matrix::zeros(rows, dim);
    for r in RESERVED..rows {
        for x in input.row_mut(r) {
            *x = rng.gen_range(-bound..=bound);
        }
    }
    let mut output = Matrix::zeros(rows, dim);
    let sampler = NegativeSampler::new(vocab)?;

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| {
            let mut f = Vec::new();
            filter_reserved(s, &mut f);
            f.retain(|&i| i < rows);
            f
        })
        .collect();
    let positions: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let total_work = (positions * config.iterations as u64).max(1) as f64;

    let mut scratch = StepScratch::new(dim);
    let mut negatives = Vec::with_capacity(config.negatives);
    let mut done = 0u64;
    let mut step = 0u64;
    for iteration in 0..config.iterations {
        for sentence in &sentences {
            let n = sentence.len();
            for p in 0..n {
                let lr = config.learning_rate * (1.0 - 0.9 * done as f64 / total_work);
                done += 1;
                let w = if config.dynamic_window {
                    rng.gen_range(1..=config.window)
                } else {
                    config.window
                };
                let lo = p.saturating_sub(w);
                let hi = (p + w).min(n - 1);
                for q in lo..=hi {
                    if q == p {
                        continue;
                    }
                    let (center, context) = (sentence[p], sentence[q]);
                    negatives.clear();
                    for _ in 0..config.negatives {
                        let neg = sampler.sample(&mut rng);
                        if neg != context {
                            negatives.push(neg);
                        }
                    }
                    let loss = sgns_step(
                        &mut input,
                        &mut output,
                        center,
                        context,
                        &negatives,
                        lr,
                        &mut scratch,
                    );
                    if !loss.is_finite() {
                        return Err(EmbeddingError::NonFiniteLoss { iteration, step });
                    }
                    step += 1;
                }
            }
        }
    }

    let mut mean = vec![0.0; dim];
    for r in RESERVED..rows {
        axpy(1.0 / (rows - RESERVED) as f64, input.row(r), &mut mean);
    }
    input.row_mut(UNK_INDEX).copy_from_slice(&mean);

    EmbeddingMatrix::new(input, vocab.fingerprint())
}

//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use senti::corpus::Vocabulary;
use senti::embedding::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Vocabulary of `tokens` synthetic words plus an embedding over it.
pub fn fixture(tokens: usize, dim: usize, seed: u64) -> (Vocabulary, EmbeddingMatrix) {
    let names: Vec<String> = (0..tokens).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::build([names], 1).expect("non-empty vocabulary");
    let emb = EmbeddingMatrix::random(&vocab, dim, 1.0 / (dim as f64).sqrt(), &mut rng(seed));
    (vocab, emb)
}

/// A sequence of `len` token indices padded to `maxlen`.
pub fn sequence(vocab: &Vocabulary, len: usize, maxlen: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    let mut v: Vec<usize> = (0..len).map(|_| r.gen_range(2..vocab.len())).collect();
    v.resize(maxlen, 0);
    v
}

//! Seeded synthetic corpora for smoke tests and controlled comparisons.
//!
//! Texts are space-separated ASCII tokens, so they pass through cleaning
//! unchanged and should be tokenized in whitespace mode.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawRecord, Sentiment};

const KEYWORDS: [&str; 3] = ["awful", "okay", "great"];

fn filler(i: usize) -> String {
    format!("w{i}")
}

fn marker(k: usize) -> String {
    format!("k{k}")
}

/// `n` documents whose label is given by one class keyword placed among
/// `len - 1` random filler tokens. Labels cycle through the three classes.
pub fn keyword_corpus(n: usize, len: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 3;
            let mut doc: Vec<String> = (0..len.saturating_sub(1))
                .map(|_| filler(rng.gen_range(0..8)))
                .collect();
            let at = rng.gen_range(0..=doc.len());
            doc.insert(at, KEYWORDS[label].to_string());
            RawRecord::new(doc.join(" "), Sentiment::from_index(label).unwrap())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongRangeConfig {
    /// Minimum number of tokens after the label-bearing marker.
    pub min_gap: usize,
    /// The gap is drawn uniformly from `min_gap..=min_gap + gap_jitter`.
    pub gap_jitter: usize,
    /// Filler tokens before the first marker, uniform in `0..=max_prefix`.
    pub max_prefix: usize,
    /// The two later markers land uniformly in the final
    /// `distractor_window` positions.
    pub distractor_window: usize,
    pub filler_vocab: usize,
}

impl Default for LongRangeConfig {
    fn default() -> Self {
        LongRangeConfig {
            min_gap: 40,
            gap_jitter: 8,
            max_prefix: 4,
            distractor_window: 40,
            filler_vocab: 12,
        }
    }
}

impl LongRangeConfig {
    /// Longest sequence the generator can emit.
    pub fn max_len(&self) -> usize {
        self.max_prefix + 1 + self.min_gap + self.gap_jitter
    }
}

/// Long-range dependency task.
///
/// Every sequence contains each of the three markers `k0 k1 k2` exactly
/// once; the label is the marker that comes first, and at least `min_gap`
/// tokens follow it. Token counts are identical across classes up to the
/// filler noise, so bag-of-words models cannot beat chance.
pub fn long_range_corpus(n: usize, config: &LongRangeConfig, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = config.distractor_window.clamp(2, config.min_gap.max(2));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 3;
        let prefix = rng.gen_range(0..=config.max_prefix);
        let gap = config.min_gap + rng.gen_range(0..=config.gap_jitter);
        let mut doc: Vec<String> = (0..prefix)
            .map(|_| filler(rng.gen_range(0..config.filler_vocab)))
            .collect();
        doc.push(marker(label));
        let mut tail: Vec<String> = (0..gap)
            .map(|_| filler(rng.gen_range(0..config.filler_vocab)))
            .collect();
        let mut others: Vec<usize> = (0..3).filter(|&k| k != label).collect();
        others.shuffle(&mut rng);
        let mut slots: Vec<usize> = (gap - window..gap).collect();
        slots.shuffle(&mut rng);
        for (k, &slot) in others.iter().zip(&slots) {
            tail[slot] = marker(*k);
        }
        doc.extend(tail);
        out.push(RawRecord::new(
            doc.join(" "),
            Sentiment::from_index(label).unwrap(),
        ));
    }
    out.shuffle(&mut rng);
    out
}

/// Corpus with planted co-occurrence structure for embedding checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceCorpus {
    pub sentences: Vec<Vec<String>>,
    /// Token pairs that always appear together.
    pub related: Vec<(String, String)>,
    /// Token pairs that never share a sentence.
    pub unrelated: Vec<(String, String)>,
}

/// `groups` topics of `group_size` tokens each; every sentence draws
/// `sentence_len` tokens from a single topic.
pub fn cooccurrence_corpus(
    groups: usize,
    group_size: usize,
    sentences: usize,
    sentence_len: usize,
    seed: u64,
) -> CooccurrenceCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let token = |g: usize, j: usize| format!("g{g}t{j}");
    let sentences = (0..sentences)
        .map(|s| {
            let g = s % groups;
            (0..sentence_len)
                .map(|_| token(g, rng.gen_range(0..group_size)))
                .collect()
        })
        .collect();
    let mut related = Vec::new();
    let mut unrelated = Vec::new();
    for g in 0..groups {
        for a in 0..group_size {
            for b in a + 1..group_size {
                related.push((token(g, a), token(g, b)));
            }
            for h in g + 1..groups {
                unrelated.push((token(g, a), token(h, a)));
            }
        }
    }
    CooccurrenceCorpus {
        sentences,
        related,
        unrelated,
    }
}

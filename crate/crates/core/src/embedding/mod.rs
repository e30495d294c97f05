//! Skip-gram word vectors and the embedding matrix the classifiers consume.

mod sgns;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Vocabulary, PAD_INDEX};
use crate::format::{self, ByteReader, ByteWriter, Checksum, FormatError};
use crate::linalg::{self, Matrix};

pub use sgns::{
    generate_pairs, sgns_gradient, train_skipgram, NegativeSampler, SgnsGradient,
    NEGATIVE_SAMPLING_POWER,
};

pub const EMBEDDING_MAGIC: &[u8; 10] = b"SENTI-EMB\0";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid embedding config: {0}")]
    Config(String),
    #[error("vocabulary has {0} non-reserved tokens; skip-gram training needs at least 2")]
    VocabularyTooSmall(usize),
    #[error("non-finite loss at iteration {iteration}, pair {step}")]
    NonFiniteLoss { iteration: usize, step: u64 },
    #[error("embedding matrix contains a non-finite entry at row {row}")]
    NonFinite { row: usize },
    #[error("padding row is not zero")]
    PadRowNotZero,
    #[error("embedding has {rows} rows but the vocabulary has {expected} entries")]
    RowMismatch { rows: usize, expected: usize },
    #[error("embedding was built for a different vocabulary")]
    FingerprintMismatch,
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub iterations: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Sample each center's window uniformly from `[1, window]`; when
    /// false every center uses the full window.
    pub dynamic_window: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 7,
            min_count: 10,
            iterations: 10,
            negatives: 5,
            learning_rate: 0.025,
            seed: 0,
            dynamic_window: true,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |m: &str| Err(EmbeddingError::Config(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        Ok(())
    }
}

/// `(|V| + 2) × dim` matrix of word vectors bound to one vocabulary.
///
/// Row 0 (padding) is always zero. Values live in memory as `f64` and are
/// stored on disk as `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    vectors: Matrix,
    vocab_fingerprint: Checksum,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Matrix, vocab_fingerprint: Checksum) -> Result<Self, EmbeddingError> {
        let m = EmbeddingMatrix {
            vectors,
            vocab_fingerprint,
        };
        m.validate()?;
        Ok(m)
    }

    /// Uniform `[-bound, bound]` rows with a zero padding row.
    pub fn random<R: Rng + ?Sized>(
        vocab: &Vocabulary,
        dim: usize,
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let mut vectors = Matrix::uniform(vocab.len(), dim, bound, rng);
        vectors.row_mut(PAD_INDEX).fill(0.0);
        EmbeddingMatrix {
            vectors,
            vocab_fingerprint: vocab.fingerprint(),
        }
    }

    pub fn rows(&self) -> usize {
        self.vectors.rows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.vectors.row(index)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.vectors
    }

    /// Mutable access for training; callers must keep the padding row zero.
    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.vectors
    }

    pub fn vocab_fingerprint(&self) -> &Checksum {
        &self.vocab_fingerprint
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        for r in 0..self.rows() {
            if !linalg::all_finite(self.row(r)) {
                return Err(EmbeddingError::NonFinite { row: r });
            }
        }
        if self.rows() > PAD_INDEX && self.row(PAD_INDEX).iter().any(|&x| x != 0.0) {
            return Err(EmbeddingError::PadRowNotZero);
        }
        Ok(())
    }

    /// Checks that this matrix was built for `vocab`.
    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), EmbeddingError> {
        if self.rows() != vocab.len() {
            return Err(EmbeddingError::RowMismatch {
                rows: self.rows(),
                expected: vocab.len(),
            });
        }
        if self.vocab_fingerprint != vocab.fingerprint() {
            return Err(EmbeddingError::FingerprintMismatch);
        }
        Ok(())
    }

    /// Rounds entries to `f32`, the precision the file format keeps.
    pub fn quantize(&mut self) {
        linalg::quantize_f32(self.vectors.as_mut_slice());
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbeddingError> {
        self.validate()?;
        let mut w = ByteWriter::new();
        w.bytes(EMBEDDING_MAGIC);
        w.u32(EMBEDDING_VERSION);
        w.u32(u32_dim(self.rows())?);
        w.u32(u32_dim(self.dim())?);
        w.bytes(&self.vocab_fingerprint);
        w.f32s(self.vectors.as_slice());
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(EMBEDDING_MAGIC, "embedding")?;
        let version = r.u32()?;
        if version != EMBEDDING_VERSION {
            return Err(FormatError::UnsupportedVersion {
                kind: "embedding",
                found: version,
                supported: EMBEDDING_VERSION,
            }
            .into());
        }
        let rows = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let fingerprint = r.checksum()?;
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| FormatError::Invalid(format!("{rows}×{dim} embedding is too large")))?;
        let data = r.f32s(n)?;
        r.finish()?;
        Self::new(Matrix::from_vec(rows, dim, data), fingerprint)
    }

    /// SHA-256 of the serialized matrix; models record it to pin their embedding.
    pub fn checksum(&self) -> Result<Checksum, EmbeddingError> {
        Ok(format::sha256(&self.to_bytes()?))
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let bytes = self.to_bytes()?;
        format::write_atomic(path, &bytes).map_err(FormatError::from)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let bytes = std::fs::read(path).map_err(FormatError::from)?;
        Self::from_bytes(&bytes)
    }
}

fn u32_dim(n: usize) -> Result<u32, FormatError> {
    u32::try_from(n).map_err(|_| FormatError::Invalid(format!("dimension {n} exceeds u32")))
}

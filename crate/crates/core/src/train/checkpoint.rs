//! Model bundles: a directory holding the model file, the embedding file
//! (sequence models only), the vocabulary and a JSON manifest.
//!
//! Every file's SHA-256 is recorded in the manifest and the model file
//! embeds the checksum of what it depends on (the embedding file for
//! sequence models, the vocabulary fingerprint for bag-of-words models), so
//! a bundle with a swapped or edited member refuses to load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    feature_count, BaselineError, LogisticModel, LogisticParams, NaiveBayesModel, TfidfModel,
    TfidfNorm,
};
use crate::corpus::{CorpusError, TokenizerMode, Vocabulary};
use crate::embedding::{EmbeddingError, EmbeddingMatrix};
use crate::format::{self, ByteReader, ByteWriter, Checksum, FormatError};
use crate::linalg::{self, Matrix};
use crate::nnet::{ForwardTrace, LstmParams, NnetError, RnnParams, SequenceModel};

pub const BUNDLE_VERSION: u32 = 1;
pub const MODEL_FILE_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.bin";
pub const EMBEDDING_FILE: &str = "embeddings.bin";
pub const VOCAB_FILE: &str = "vocab.tsv";

const LSTM_MAGIC: &[u8] = b"SENTI-LSTM\0";
const RNN_MAGIC: &[u8] = b"SENTI-RNN\0";
const NB_MAGIC: &[u8] = b"SENTI-NB\0";
const LOGREG_MAGIC: &[u8] = b"SENTI-LOGREG\0";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported bundle version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("{file} does not match the checksum recorded in the manifest")]
    ChecksumMismatch { file: String },
    #[error("bundle does not list {0}")]
    MissingFile(&'static str),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("manifest says {manifest:?} but model file holds {file:?}")]
    KindMismatch {
        manifest: ModelKind,
        file: ModelKind,
    },
    #[error("{0:?} model needs an embedding matrix")]
    MissingEmbedding(ModelKind),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Rnn,
    NaiveBayes,
    Logreg,
}

impl ModelKind {
    pub fn uses_embedding(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Rnn)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lstm => "LSTM",
            ModelKind::Rnn => "RNN",
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::Logreg => "Logistic Regression",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Lstm(LstmParams),
    Rnn(RnnParams),
    NaiveBayes(NaiveBayesModel),
    Logistic(LogisticModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lstm(_) => ModelKind::Lstm,
            Model::Rnn(_) => ModelKind::Rnn,
            Model::NaiveBayes(_) => ModelKind::NaiveBayes,
            Model::Logistic(_) => ModelKind::Logreg,
        }
    }

    /// Class probabilities for one encoded sequence.
    pub fn predict_proba(
        &self,
        embedding: Option<&EmbeddingMatrix>,
        indices: &[usize],
    ) -> Result<Vec<f64>, CheckpointError> {
        let need = || CheckpointError::MissingEmbedding(self.kind());
        Ok(match self {
            Model::Lstm(p) => p
                .forward(embedding.ok_or_else(need)?, indices)?
                .probabilities()
                .to_vec(),
            Model::Rnn(p) => p
                .forward(embedding.ok_or_else(need)?, indices)?
                .probabilities()
                .to_vec(),
            Model::NaiveBayes(m) => m.predict_proba(indices)?,
            Model::Logistic(m) => m.predict_proba(indices)?,
        })
    }

    /// Rounds every parameter to `f32`, the precision model files keep.
    pub fn quantize(&mut self) {
        match self {
            Model::Lstm(p) => p.quantize(),
            Model::Rnn(p) => p.quantize(),
            Model::NaiveBayes(m) => {
                linalg::quantize_f32(&mut m.log_priors);
                linalg::quantize_f32(m.log_likelihoods.as_mut_slice());
                m.alpha = m.alpha as f32 as f64;
            }
            Model::Logistic(m) => {
                linalg::quantize_f32(&mut m.tfidf.idf);
                linalg::quantize_f32(m.params.weights.as_mut_slice());
                linalg::quantize_f32(&mut m.params.bias);
                m.l2 = m.l2 as f32 as f64;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub bundle_version: u32,
    pub model_file_version: u32,
    pub kind: ModelKind,
    pub seed: u64,
    pub maxlen: usize,
    pub tokenizer: TokenizerMode,
    /// Effective configuration of the run that produced the bundle.
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Run metadata recorded alongside the model.
#[derive(Clone, Debug, PartialEq)]
pub struct RunInfo {
    pub seed: u64,
    pub maxlen: usize,
    pub tokenizer: TokenizerMode,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub embedding: Option<EmbeddingMatrix>,
    pub vocab: Vocabulary,
    pub manifest: Manifest,
}

impl Checkpoint {
    pub fn predict_proba(&self, indices: &[usize]) -> Result<Vec<f64>, CheckpointError> {
        self.model.predict_proba(self.embedding.as_ref(), indices)
    }
}

fn dim(n: usize) -> Result<u32, FormatError> {
    u32::try_from(n).map_err(|_| FormatError::Invalid(format!("dimension {n} exceeds u32")))
}

fn header(
    w: &mut ByteWriter,
    magic: &[u8],
    dims: &[usize],
    linked: &Checksum,
) -> Result<(), FormatError> {
    w.bytes(magic);
    w.u32(MODEL_FILE_VERSION);
    for &d in dims {
        w.u32(dim(d)?);
    }
    w.bytes(linked);
    Ok(())
}

/// Serializes `model`. `linked` is the embedding file's SHA-256 for
/// sequence models and the vocabulary fingerprint otherwise.
pub fn write_model_file(
    model: &Model,
    maxlen: usize,
    linked: &Checksum,
) -> Result<Vec<u8>, FormatError> {
    let mut w = ByteWriter::new();
    match model {
        Model::Lstm(p) => {
            header(
                &mut w,
                LSTM_MAGIC,
                &[p.hidden(), p.input(), p.classes(), maxlen],
                linked,
            )?;
            for t in p.tensors() {
                w.f32s(t);
            }
        }
        Model::Rnn(p) => {
            header(
                &mut w,
                RNN_MAGIC,
                &[p.hidden(), p.input(), p.classes(), maxlen],
                linked,
            )?;
            for t in p.tensors() {
                w.f32s(t);
            }
        }
        Model::NaiveBayes(m) => {
            header(
                &mut w,
                NB_MAGIC,
                &[m.log_priors.len(), m.features(), maxlen],
                linked,
            )?;
            w.f32s(&[m.alpha]);
            w.f32s(&m.log_priors);
            w.f32s(m.log_likelihoods.as_slice());
        }
        Model::Logistic(m) => {
            let dims = [m.params.bias.len(), m.tfidf.features(), maxlen];
            header(&mut w, LOGREG_MAGIC, &dims, linked)?;
            let flags = m.tfidf.sublinear_tf as u32 | ((m.tfidf.norm == TfidfNorm::L2) as u32) << 1;
            w.u32(flags);
            w.f32s(&[m.l2]);
            w.f32s(&m.tfidf.idf);
            w.f32s(m.params.weights.as_slice());
            w.f32s(&m.params.bias);
        }
    }
    Ok(w.finish_with_crc())
}

fn read_dims<const N: usize>(r: &mut ByteReader<'_>) -> Result<[usize; N], FormatError> {
    let mut out = [0usize; N];
    for d in out.iter_mut() {
        *d = r.u32()? as usize;
    }
    Ok(out)
}

fn product(a: usize, b: usize) -> Result<usize, FormatError> {
    a.checked_mul(b)
        .ok_or_else(|| FormatError::Invalid(format!("{a}×{b} tensor is too large")))
}

fn fill_tensors<M: SequenceModel>(
    model: &mut M,
    r: &mut ByteReader<'_>,
) -> Result<(), FormatError> {
    for t in model.tensors_mut() {
        let values = r.f32s(t.len())?;
        t.copy_from_slice(&values);
    }
    Ok(())
}

/// Parses a model file into `(model, maxlen, linked checksum)`.
pub fn read_model_file(bytes: &[u8]) -> Result<(Model, usize, Checksum), CheckpointError> {
    let mut r = ByteReader::with_trailing_crc(bytes)?;
    let magic = [LSTM_MAGIC, RNN_MAGIC, NB_MAGIC, LOGREG_MAGIC]
        .into_iter()
        .find(|m| bytes.starts_with(m))
        .ok_or(FormatError::BadMagic { expected: "model" })?;
    r.take(magic.len())?;
    let version = r.u32()?;
    if version != MODEL_FILE_VERSION {
        return Err(FormatError::UnsupportedVersion {
            kind: "model",
            found: version,
            supported: MODEL_FILE_VERSION,
        }
        .into());
    }
    let (model, maxlen, linked) = if magic == LSTM_MAGIC || magic == RNN_MAGIC {
        let [hidden, input, classes, maxlen] = read_dims::<4>(&mut r)?;
        product(hidden + input, hidden)?;
        let linked = r.checksum()?;
        let model = if magic == LSTM_MAGIC {
            let mut p = LstmParams::zeros(hidden, input, classes);
            fill_tensors(&mut p, &mut r)?;
            p.validate()?;
            Model::Lstm(p)
        } else {
            let mut p = RnnParams::zeros(hidden, input, classes);
            fill_tensors(&mut p, &mut r)?;
            p.validate()?;
            Model::Rnn(p)
        };
        (model, maxlen, linked)
    } else if magic == NB_MAGIC {
        let [classes, features, maxlen] = read_dims::<3>(&mut r)?;
        let linked = r.checksum()?;
        let alpha = r.f32s(1)?[0];
        let log_priors = r.f32s(classes)?;
        let ll = r.f32s(product(classes, features)?)?;
        let m = NaiveBayesModel {
            log_priors,
            log_likelihoods: Matrix::from_vec(classes, features, ll),
            alpha,
        };
        m.validate()?;
        (Model::NaiveBayes(m), maxlen, linked)
    } else {
        let [classes, features, maxlen] = read_dims::<3>(&mut r)?;
        let linked = r.checksum()?;
        let flags = r.u32()?;
        let l2 = r.f32s(1)?[0];
        let idf = r.f32s(features)?;
        let weights = r.f32s(product(classes, features)?)?;
        let bias = r.f32s(classes)?;
        let m = LogisticModel {
            tfidf: TfidfModel {
                idf,
                sublinear_tf: flags & 1 != 0,
                norm: if flags & 2 != 0 {
                    TfidfNorm::L2
                } else {
                    TfidfNorm::None
                },
            },
            params: LogisticParams {
                weights: Matrix::from_vec(classes, features, weights),
                bias,
            },
            l2,
        };
        m.validate()?;
        (Model::Logistic(m), maxlen, linked)
    };
    r.finish()?;
    Ok((model, maxlen, linked))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_member(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry, CheckpointError> {
    let path = dir.join(name);
    format::write_atomic(&path, bytes).map_err(io_err(&path))?;
    Ok(FileEntry {
        name: name.to_string(),
        sha256: hex::encode(format::sha256(bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Writes a bundle for `model` into `dir` and returns its manifest.
///
/// Parameters are stored as `f32`; restoring yields the model rounded to
/// that precision (see [`Model::quantize`]).
pub fn checkpoint(
    dir: &Path,
    model: &Model,
    embedding: Option<&EmbeddingMatrix>,
    vocab: &Vocabulary,
    info: &RunInfo,
) -> Result<Manifest, CheckpointError> {
    let kind = model.kind();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();

    let vocab_text = vocab.to_text();
    let linked = if kind.uses_embedding() {
        let emb = embedding.ok_or(CheckpointError::MissingEmbedding(kind))?;
        emb.check_vocabulary(vocab)?;
        let bytes = emb.to_bytes()?;
        files.push(write_member(dir, EMBEDDING_FILE, &bytes)?);
        format::sha256(&bytes)
    } else {
        vocab.fingerprint()
    };
    files.push(write_member(
        dir,
        MODEL_FILE,
        &write_model_file(model, info.maxlen, &linked)?,
    )?);
    files.push(write_member(dir, VOCAB_FILE, vocab_text.as_bytes())?);
    files.sort_by(|a, b| a.name.cmp(&b.name));

    let manifest = Manifest {
        bundle_version: BUNDLE_VERSION,
        model_file_version: MODEL_FILE_VERSION,
        kind,
        seed: info.seed,
        maxlen: info.maxlen,
        tokenizer: info.tokenizer,
        config: info.config.clone(),
        files,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let path = dir.join(MANIFEST_FILE);
    format::write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}

fn read_member(
    dir: &Path,
    manifest: &Manifest,
    name: &'static str,
) -> Result<Vec<u8>, CheckpointError> {
    let entry = manifest
        .file(name)
        .ok_or(CheckpointError::MissingFile(name))?;
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if hex::encode(format::sha256(&bytes)) != entry.sha256 {
        return Err(CheckpointError::ChecksumMismatch {
            file: name.to_string(),
        });
    }
    Ok(bytes)
}

/// Loads and cross-checks a bundle written by [`checkpoint`].
pub fn restore(dir: &Path) -> Result<Checkpoint, CheckpointError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.bundle_version != BUNDLE_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: manifest.bundle_version,
            supported: BUNDLE_VERSION,
        });
    }

    let vocab_bytes = read_member(dir, &manifest, VOCAB_FILE)?;
    let vocab_text = String::from_utf8(vocab_bytes)
        .map_err(|_| CheckpointError::VocabMismatch("vocabulary is not UTF-8".into()))?;
    let vocab = Vocabulary::from_text(&vocab_text)?;

    let model_bytes = read_member(dir, &manifest, MODEL_FILE)?;
    let (model, maxlen, linked) = read_model_file(&model_bytes)?;
    if model.kind() != manifest.kind {
        return Err(CheckpointError::KindMismatch {
            manifest: manifest.kind,
            file: model.kind(),
        });
    }
    if maxlen != manifest.maxlen {
        return Err(FormatError::Invalid(format!(
            "model file maxlen {maxlen} disagrees with manifest {}",
            manifest.maxlen
        ))
        .into());
    }

    let embedding = if manifest.kind.uses_embedding() {
        let bytes = read_member(dir, &manifest, EMBEDDING_FILE)?;
        if format::sha256(&bytes) != linked {
            return Err(FormatError::ChecksumMismatch {
                what: "embedding file referenced by the model".into(),
            }
            .into());
        }
        let emb = EmbeddingMatrix::from_bytes(&bytes)?;
        emb.check_vocabulary(&vocab)
            .map_err(|e| CheckpointError::VocabMismatch(e.to_string()))?;
        let input = match &model {
            Model::Lstm(p) => p.input(),
            Model::Rnn(p) => p.input(),
            _ => unreachable!(),
        };
        if input != emb.dim() {
            return Err(NnetError::Shape(format!(
                "model input {input} but embedding dim {}",
                emb.dim()
            ))
            .into());
        }
        Some(emb)
    } else {
        if linked != vocab.fingerprint() {
            return Err(CheckpointError::VocabMismatch(
                "model was fitted on a different vocabulary".into(),
            ));
        }
        let features = match &model {
            Model::NaiveBayes(m) => m.features(),
            Model::Logistic(m) => m.tfidf.features(),
            _ => unreachable!(),
        };
        if features != feature_count(vocab.len()) {
            return Err(CheckpointError::VocabMismatch(format!(
                "model has {features} features, vocabulary implies {}",
                feature_count(vocab.len())
            )));
        }
        None
    };

    Ok(Checkpoint {
        model,
        embedding,
        vocab,
        manifest,
    })
}

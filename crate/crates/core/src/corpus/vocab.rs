use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::CorpusError;
use crate::format::{self, Checksum};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
/// Number of reserved indices preceding corpus tokens.
pub const RESERVED: usize = 2;

const PAD_NAME: &str = "<pad>";
const UNK_NAME: &str = "<unk>";
const HEADER_PREFIX: &str = "#senti-vocab v1 min_count=";

/// Token ↔ index bijection over tokens that met the frequency threshold.
///
/// Index 0 is padding and index 1 the unknown token; corpus tokens start at
/// [`RESERVED`], ordered by descending frequency with lexicographic ties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    // Entries for indices >= RESERVED, i.e. tokens[i - RESERVED].
    tokens: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Counts tokens across the corpus and keeps those seen at least
    /// `min_count` times.
    pub fn build<I, D, S>(corpus: I, min_count: u64) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(CorpusError::InvalidMinCount);
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        for doc in corpus {
            for tok in doc {
                let tok = tok.as_ref();
                if let Some(c) = freq.get_mut(tok) {
                    *c += 1;
                } else {
                    freq.insert(tok.to_owned(), 1);
                }
            }
        }
        let mut kept: Vec<(String, u64)> =
            freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::from_sorted(kept, min_count))
    }

    fn from_sorted(kept: Vec<(String, u64)>, min_count: u64) -> Self {
        let mut token_to_index = HashMap::with_capacity(kept.len());
        let mut tokens = Vec::with_capacity(kept.len());
        let mut counts = Vec::with_capacity(kept.len());
        for (i, (tok, c)) in kept.into_iter().enumerate() {
            token_to_index.insert(tok.clone(), i + RESERVED);
            tokens.push(tok);
            counts.push(c);
        }
        Vocabulary {
            token_to_index,
            tokens,
            counts,
            min_count,
        }
    }

    /// Total index count, reserved entries included.
    pub fn len(&self) -> usize {
        self.tokens.len() + RESERVED
    }

    /// True when only the reserved indices exist.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(UNK_INDEX)
    }

    /// Token stored at `index`; `None` for reserved or out-of-range indices.
    pub fn token(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(RESERVED)
            .and_then(|i| self.tokens.get(i))
            .map(String::as_str)
    }

    pub fn frequency(&self, token: &str) -> Option<u64> {
        self.index(token).map(|i| self.counts[i - RESERVED])
    }

    /// Frequency by index; reserved indices report 0.
    pub fn frequency_at(&self, index: usize) -> u64 {
        index
            .checked_sub(RESERVED)
            .and_then(|i| self.counts.get(i))
            .copied()
            .unwrap_or(0)
    }

    /// `(index, token, frequency)` for every non-reserved entry, in index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (t, &c))| (i + RESERVED, t.as_str(), c))
    }

    /// Text form written by [`Vocabulary::save`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER_PREFIX}{}", self.min_count);
        let _ = writeln!(out, "{PAD_INDEX}\t{PAD_NAME}\t0");
        let _ = writeln!(out, "{UNK_INDEX}\t{UNK_NAME}\t0");
        for (i, tok, c) in self.entries() {
            let _ = writeln!(out, "{i}\t{tok}\t{c}");
        }
        out
    }

    /// SHA-256 of the text form; binds embeddings and models to this vocabulary.
    pub fn fingerprint(&self) -> Checksum {
        format::sha256(self.to_text().as_bytes())
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let bad = |line: usize, msg: &str| CorpusError::VocabFormat {
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let min_count: u64 = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| bad(1, "expected `#senti-vocab v1 min_count=<k>` header"))?
            .parse()
            .map_err(|_| bad(1, "min_count is not an integer"))?;
        if min_count == 0 {
            return Err(bad(1, "min_count must be at least 1"));
        }

        let mut kept = Vec::new();
        let mut expected = 0usize;
        for (lineno, line) in lines {
            let mut fields = line.split('\t');
            let (Some(idx), Some(tok), Some(freq), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad(lineno, "expected index<TAB>token<TAB>frequency"));
            };
            let idx: usize = idx.parse().map_err(|_| bad(lineno, "bad index"))?;
            let freq: u64 = freq.parse().map_err(|_| bad(lineno, "bad frequency"))?;
            if idx != expected {
                return Err(bad(
                    lineno,
                    &format!("expected index {expected}, found {idx}"),
                ));
            }
            expected += 1;
            match idx {
                PAD_INDEX | UNK_INDEX => continue,
                _ => {
                    if freq < min_count {
                        return Err(bad(lineno, "frequency below min_count"));
                    }
                    kept.push((tok.to_owned(), freq));
                }
            }
        }
        if expected < RESERVED {
            return Err(bad(1, "reserved pad/unk entries missing"));
        }
        let vocab = Self::from_sorted(kept, min_count);
        if vocab.token_to_index.len() != vocab.tokens.len() {
            return Err(bad(1, "duplicate token"));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        if let Some(tok) = self.tokens.iter().find(|t| t.contains(['\t', '\n', '\r'])) {
            return Err(CorpusError::UnstorableToken(tok.clone()));
        }
        format::write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

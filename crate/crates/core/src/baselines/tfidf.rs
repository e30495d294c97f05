use serde::{Deserialize, Serialize};

use super::{term_counts, BaselineError, SparseVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfidfNorm {
    #[default]
    L2,
    None,
}

/// Smoothed inverse document frequencies, `idf_t = ln((1+N)/(1+df_t)) + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfModel {
    pub idf: Vec<f64>,
    /// Use `1 + ln(tf)` instead of the raw count.
    pub sublinear_tf: bool,
    pub norm: TfidfNorm,
}

impl TfidfModel {
    pub fn features(&self) -> usize {
        self.idf.len()
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.idf.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(BaselineError::NonFinite("idf"))
        }
    }

    pub fn transform(&self, indices: &[usize]) -> Result<SparseVector, BaselineError> {
        tfidf_transform(self, indices)
    }
}

pub fn tfidf_fit<'a, I>(
    documents: I,
    features: usize,
    sublinear_tf: bool,
    norm: TfidfNorm,
) -> Result<TfidfModel, BaselineError>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut df = vec![0u64; features];
    let mut n = 0u64;
    for doc in documents {
        n += 1;
        for (f, _) in term_counts(doc, features)? {
            df[f] += 1;
        }
    }
    if n == 0 {
        return Err(BaselineError::Empty);
    }
    let idf = df
        .iter()
        .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    Ok(TfidfModel {
        idf,
        sublinear_tf,
        norm,
    })
}

pub fn tfidf_transform(
    model: &TfidfModel,
    indices: &[usize],
) -> Result<SparseVector, BaselineError> {
    let mut v = term_counts(indices, model.features())?;
    for (f, x) in v.iter_mut() {
        let tf = if model.sublinear_tf { 1.0 + x.ln() } else { *x };
        *x = tf * model.idf[*f];
    }
    if model.norm == TfidfNorm::L2 {
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in v.iter_mut() {
                *x /= norm;
            }
        }
    }
    Ok(v)
}

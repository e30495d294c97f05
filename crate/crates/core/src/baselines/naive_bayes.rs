use crate::corpus::{EncodedExample, Sentiment};
use crate::linalg::{self, Matrix};

use super::{term_counts, BaselineError};

const K: usize = Sentiment::COUNT;

/// Multinomial Naive Bayes over token counts with additive smoothing.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayesModel {
    pub log_priors: Vec<f64>,
    /// `classes × features`; each row is a log-probability distribution.
    pub log_likelihoods: Matrix,
    pub alpha: f64,
}

impl NaiveBayesModel {
    pub fn features(&self) -> usize {
        self.log_likelihoods.cols()
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.log_priors.len() != K || self.log_likelihoods.rows() != K {
            return Err(BaselineError::Config(
                "naive bayes expects three classes".into(),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(BaselineError::Config("alpha must be positive".into()));
        }
        if !linalg::all_finite(&self.log_priors) || !self.log_likelihoods.is_finite() {
            return Err(BaselineError::NonFinite("naive bayes parameters"));
        }
        Ok(())
    }

    /// Unnormalized log joint `log P(k) + Σ count·log P(t|k)`.
    pub fn joint_log_likelihood(&self, indices: &[usize]) -> Result<Vec<f64>, BaselineError> {
        let counts = term_counts(indices, self.features())?;
        Ok((0..K)
            .map(|k| {
                let row = self.log_likelihoods.row(k);
                self.log_priors[k] + counts.iter().map(|&(f, c)| c * row[f]).sum::<f64>()
            })
            .collect())
    }

    pub fn predict_proba(&self, indices: &[usize]) -> Result<Vec<f64>, BaselineError> {
        let joint = self.joint_log_likelihood(indices)?;
        let z = linalg::log_sum_exp(&joint);
        Ok(joint.iter().map(|j| (j - z).exp()).collect())
    }

    pub fn predict(&self, indices: &[usize]) -> Result<Sentiment, BaselineError> {
        let joint = self.joint_log_likelihood(indices)?;
        Ok(Sentiment::from_index(linalg::argmax(&joint)).expect("three classes"))
    }
}

pub fn nb_fit(
    examples: &[EncodedExample],
    features: usize,
    alpha: f64,
) -> Result<NaiveBayesModel, BaselineError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(BaselineError::Config("alpha must be positive".into()));
    }
    if examples.is_empty() {
        return Err(BaselineError::Empty);
    }
    let mut docs = [0u64; K];
    let mut counts = Matrix::zeros(K, features);
    for ex in examples {
        let k = ex.label.index();
        docs[k] += 1;
        let row = counts.row_mut(k);
        for (f, c) in term_counts(&ex.indices, features)? {
            row[f] += c;
        }
    }
    if let Some(k) = (0..K).find(|&k| docs[k] == 0) {
        return Err(BaselineError::MissingClass(
            Sentiment::from_index(k).unwrap(),
        ));
    }
    let n = examples.len() as f64;
    let log_priors = docs.iter().map(|&d| (d as f64 / n).ln()).collect();
    let mut log_likelihoods = Matrix::zeros(K, features);
    for k in 0..K {
        let row = counts.row(k);
        let denom = (row.iter().sum::<f64>() + alpha * features as f64).ln();
        for (out, &c) in log_likelihoods.row_mut(k).iter_mut().zip(row) {
            *out = (c + alpha).ln() - denom;
        }
    }
    Ok(NaiveBayesModel {
        log_priors,
        log_likelihoods,
        alpha,
    })
}

pub fn nb_predict(model: &NaiveBayesModel, indices: &[usize]) -> Result<Sentiment, BaselineError> {
    model.predict(indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sentiment::*;

    fn ex(indices: &[usize], label: Sentiment) -> EncodedExample {
        EncodedExample {
            indices: indices.to_vec(),
            label,
            original_length: indices.iter().filter(|&&i| i != 0).count(),
        }
    }

    #[test]
    fn disjoint_vocabularies_are_separable() {
        let train = [
            ex(&[2, 3], Negative),
            ex(&[4, 5], Neutral),
            ex(&[6, 7], Positive),
        ];
        let m = nb_fit(&train, 7, 1.0).unwrap();
        for e in &train {
            assert_eq!(nb_predict(&m, &e.indices).unwrap(), e.label);
        }
        for k in 0..3 {
            let s: f64 = m.log_likelihoods.row(k).iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_alpha_falls_back_to_priors() {
        let train = [
            ex(&[2], Negative),
            ex(&[3], Neutral),
            ex(&[4], Positive),
            ex(&[4], Positive),
        ];
        let m = nb_fit(&train, 4, 1e12).unwrap();
        assert_eq!(m.predict(&[2, 2, 2]).unwrap(), Positive);
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let train = [ex(&[2], Negative), ex(&[2], Neutral), ex(&[2], Positive)];
        let m = nb_fit(&train, 2, 1.0).unwrap();
        assert_eq!(m.predict(&[2]).unwrap(), Negative);
    }

    #[test]
    fn missing_class_and_bad_alpha() {
        let train = [ex(&[2], Negative), ex(&[3], Positive)];
        assert_eq!(
            nb_fit(&train, 3, 1.0).unwrap_err(),
            BaselineError::MissingClass(Neutral)
        );
        assert!(matches!(
            nb_fit(&train, 3, 0.0),
            Err(BaselineError::Config(_))
        ));
    }
}

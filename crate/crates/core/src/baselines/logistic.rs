use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedExample, Sentiment};
use crate::linalg::{self, Matrix};

use super::{tfidf_fit, BaselineError, SparseVector, TfidfModel, TfidfNorm};

const K: usize = Sentiment::COUNT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Penalty `λ/2·‖W‖²` on the weights (bias unpenalized).
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub sublinear_tf: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            learning_rate: 1.0,
            iterations: 300,
            sublinear_tf: false,
        }
    }
}

impl LogisticConfig {
    fn validate(&self) -> Result<(), BaselineError> {
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(BaselineError::Config("l2 must be nonnegative".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(BaselineError::Config(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticParams {
    /// `classes × features`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LogisticParams {
    pub fn zeros(features: usize) -> Self {
        LogisticParams {
            weights: Matrix::zeros(K, features),
            bias: vec![0.0; K],
        }
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        (0..K)
            .map(|k| {
                let row = self.weights.row(k);
                self.bias[k] + x.iter().map(|&(f, v)| v * row[f]).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[(usize, f64)]) -> Vec<f64> {
        linalg::softmax(&self.logits(x))
    }
}

/// Mean softmax cross-entropy plus the L2 penalty over a fixed feature set.
pub struct LogisticObjective<'a> {
    pub features: &'a [SparseVector],
    pub labels: &'a [usize],
    pub l2: f64,
}

impl LogisticObjective<'_> {
    pub fn value(&self, p: &LogisticParams) -> f64 {
        let n = self.features.len() as f64;
        let data: f64 = self
            .features
            .iter()
            .zip(self.labels)
            .map(|(x, &y)| crate::nnet::cross_entropy(&p.logits(x), y))
            .sum();
        let penalty: f64 = p.weights.as_slice().iter().map(|w| w * w).sum();
        data / n + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, p: &LogisticParams) -> LogisticParams {
        let n = self.features.len() as f64;
        let mut g = LogisticParams::zeros(p.weights.cols());
        for (x, &y) in self.features.iter().zip(self.labels) {
            let mut delta = p.probabilities(x);
            delta[y] -= 1.0;
            for (k, d) in delta.iter().enumerate() {
                let row = g.weights.row_mut(k);
                for &(f, v) in x {
                    row[f] += d * v / n;
                }
                g.bias[k] += d / n;
            }
        }
        linalg::axpy(self.l2, p.weights.as_slice(), g.weights.as_mut_slice());
        g
    }
}

/// Softmax regression on TF-IDF features.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub tfidf: TfidfModel,
    pub params: LogisticParams,
    pub l2: f64,
}

impl LogisticModel {
    pub fn validate(&self) -> Result<(), BaselineError> {
        self.tfidf.validate()?;
        if self.params.weights.rows() != K
            || self.params.bias.len() != K
            || self.params.weights.cols() != self.tfidf.features()
        {
            return Err(BaselineError::Config("logistic tensors disagree".into()));
        }
        if !self.params.weights.is_finite() || !linalg::all_finite(&self.params.bias) {
            return Err(BaselineError::NonFinite("logistic parameters"));
        }
        Ok(())
    }

    pub fn predict_proba(&self, indices: &[usize]) -> Result<Vec<f64>, BaselineError> {
        Ok(self.params.probabilities(&self.tfidf.transform(indices)?))
    }

    pub fn predict(&self, indices: &[usize]) -> Result<Sentiment, BaselineError> {
        let logits = self.params.logits(&self.tfidf.transform(indices)?);
        Ok(Sentiment::from_index(linalg::argmax(&logits)).expect("three classes"))
    }
}

/// Full-batch gradient descent from zero weights. Returns the parameters
/// and the objective before each step plus the final value.
pub fn logreg_fit_features(
    features: &[SparseVector],
    labels: &[usize],
    dim: usize,
    config: &LogisticConfig,
) -> Result<(LogisticParams, Vec<f64>), BaselineError> {
    config.validate()?;
    if features.is_empty() {
        return Err(BaselineError::Empty);
    }
    if features.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            documents: features.len(),
            labels: labels.len(),
        });
    }
    let objective = LogisticObjective {
        features,
        labels,
        l2: config.l2,
    };
    let mut p = LogisticParams::zeros(dim);
    let mut history = Vec::with_capacity(config.iterations + 1);
    for _ in 0..config.iterations {
        history.push(objective.value(&p));
        let g = objective.gradient(&p);
        linalg::axpy(
            -config.learning_rate,
            g.weights.as_slice(),
            p.weights.as_mut_slice(),
        );
        linalg::axpy(-config.learning_rate, &g.bias, &mut p.bias);
    }
    let last = objective.value(&p);
    if !last.is_finite() {
        return Err(BaselineError::NonFinite("logistic objective"));
    }
    history.push(last);
    Ok((p, history))
}

pub fn logreg_fit(
    examples: &[EncodedExample],
    features: usize,
    config: &LogisticConfig,
) -> Result<LogisticModel, BaselineError> {
    let tfidf = tfidf_fit(
        examples.iter().map(|e| e.indices.as_slice()),
        features,
        config.sublinear_tf,
        TfidfNorm::L2,
    )?;
    let xs = examples
        .iter()
        .map(|e| tfidf.transform(&e.indices))
        .collect::<Result<Vec<_>, _>>()?;
    let ys: Vec<usize> = examples.iter().map(|e| e.label.index()).collect();
    let (params, _) = logreg_fit_features(&xs, &ys, features, config)?;
    Ok(LogisticModel {
        tfidf,
        params,
        l2: config.l2,
    })
}

pub fn logreg_predict(
    model: &LogisticModel,
    indices: &[usize],
) -> Result<Sentiment, BaselineError> {
    model.predict(indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_are_uniform() {
        let p = LogisticParams::zeros(4);
        assert_eq!(p.probabilities(&[(1, 3.0)]), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn separable_two_feature_set() {
        // Class k is indicated by a large value on one of two features;
        // class 2 by both.
        let xs: Vec<SparseVector> = vec![
            vec![(0, 1.0)],
            vec![(0, 0.9)],
            vec![(1, 1.0)],
            vec![(1, 0.8)],
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 0.9), (1, 0.9)],
        ];
        let ys = [0, 0, 1, 1, 2, 2];
        let config = LogisticConfig {
            l2: 0.0,
            learning_rate: 2.0,
            iterations: 3000,
            ..Default::default()
        };
        let (p, history) = logreg_fit_features(&xs, &ys, 2, &config).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(linalg::argmax(&p.logits(x)), y);
        }
        assert!(history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn rejects_bad_config() {
        let xs = vec![vec![(0, 1.0)]];
        for config in [
            LogisticConfig {
                l2: -1.0,
                ..Default::default()
            },
            LogisticConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
        ] {
            assert!(logreg_fit_features(&xs, &[0], 1, &config).is_err());
        }
        assert!(matches!(
            logreg_fit_features(&xs, &[0, 1], 1, &LogisticConfig::default()),
            Err(BaselineError::LengthMismatch { .. })
        ));
    }
}

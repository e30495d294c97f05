use rand::Rng;

use super::{
    check_embedding, check_finite, check_label, embed, head_backward, head_forward, ForwardTrace,
    Gradients, NnetError, SequenceModel,
};
use crate::corpus::PAD_INDEX;
use crate::embedding::EmbeddingMatrix;
use crate::linalg::{self, Matrix};

/// Elman RNN, `h_t = tanh(W·[h_{t-1}, x_t] + b)`, with the same dense
/// softmax head as the LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

const TENSOR_NAMES: &[&str] = &["w", "b", "head_w", "head_b"];

impl RnnParams {
    pub fn zeros(hidden: usize, input: usize, classes: usize) -> Self {
        RnnParams {
            w: Matrix::zeros(hidden, hidden + input),
            b: vec![0.0; hidden],
            head_w: Matrix::zeros(classes, hidden),
            head_b: vec![0.0; classes],
        }
    }

    /// Same scheme as the LSTM: recurrent matrix in `±1/√(hidden + input)`,
    /// head in `±1/√hidden`, zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, input: usize, classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden, input, classes);
        p.w = Matrix::uniform(
            hidden,
            hidden + input,
            1.0 / ((hidden + input) as f64).sqrt(),
            rng,
        );
        p.head_w = Matrix::uniform(classes, hidden, 1.0 / (hidden as f64).sqrt(), rng);
        p
    }

    pub fn hidden(&self) -> usize {
        self.w.rows()
    }

    pub fn input(&self) -> usize {
        self.w.cols() - self.w.rows()
    }

    pub fn classes(&self) -> usize {
        self.head_w.rows()
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        if self.b.len() != self.hidden()
            || self.head_w.cols() != self.hidden()
            || self.head_b.len() != self.classes()
        {
            return Err(NnetError::Shape("rnn tensors disagree".into()));
        }
        for t in self.tensors() {
            check_finite(t, "rnn parameters")?;
        }
        Ok(())
    }

    pub fn quantize(&mut self) {
        for t in self.tensors_mut() {
            linalg::quantize_f32(t);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn rnn_step(params: &RnnParams, h: &[f64], x: &[f64]) -> Result<RnnStepCache, NnetError> {
    if x.len() != params.input() || h.len() != params.hidden() {
        return Err(NnetError::Shape(format!(
            "rnn_step expects input {} and state {}",
            params.input(),
            params.hidden()
        )));
    }
    check_finite(x, "rnn input")?;
    check_finite(h, "rnn hidden state")?;
    let mut z = vec![0.0; params.hidden()];
    params.w.affine_concat(h, x, &params.b, &mut z);
    let h_next = z.iter().map(|v| v.tanh()).collect();
    Ok(RnnStepCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        z,
        h: h_next,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnTrace {
    pub tokens: Vec<usize>,
    pub steps: Vec<RnnStepCache>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ForwardTrace for RnnTrace {
    fn logits(&self) -> &[f64] {
        &self.logits
    }

    fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    fn len(&self) -> usize {
        self.steps.len()
    }
}

impl SequenceModel for RnnParams {
    type Trace = RnnTrace;

    fn classes(&self) -> usize {
        RnnParams::classes(self)
    }

    fn input_dim(&self) -> usize {
        self.input()
    }

    fn hidden_dim(&self) -> usize {
        self.hidden()
    }

    fn forward(
        &self,
        embedding: &EmbeddingMatrix,
        indices: &[usize],
    ) -> Result<RnnTrace, NnetError> {
        check_embedding(embedding, self.input())?;
        let mut h = vec![0.0; self.hidden()];
        let mut tokens = Vec::new();
        let mut steps: Vec<RnnStepCache> = Vec::new();
        for &idx in indices {
            if idx == PAD_INDEX {
                continue;
            }
            let step = rnn_step(self, &h, embed(embedding, idx)?)?;
            h.clone_from(&step.h);
            tokens.push(idx);
            steps.push(step);
        }
        if steps.is_empty() {
            return Err(NnetError::EmptySequence);
        }
        let (logits, probabilities) = head_forward(&self.head_w, &self.head_b, &h);
        check_finite(&logits, "logits")?;
        Ok(RnnTrace {
            tokens,
            steps,
            logits,
            probabilities,
        })
    }

    fn backward(&self, trace: &RnnTrace, label: usize) -> Result<Gradients<Self>, NnetError> {
        check_label(label, self.classes())?;
        let last = trace.steps.last().ok_or(NnetError::EmptySequence)?;
        let hidden = self.hidden();
        let mut g = Gradients::zeros(self);
        let mut dh = head_backward(
            &self.head_w,
            &trace.probabilities,
            &last.h,
            label,
            &mut g.params.head_w,
            &mut g.params.head_b,
        );
        let mut dz = vec![0.0; hidden];
        let mut dconcat = vec![0.0; self.w.cols()];
        for (s, &token) in trace.steps.iter().zip(&trace.tokens).rev() {
            for k in 0..hidden {
                dz[k] = dh[k] * (1.0 - s.h[k] * s.h[k]);
            }
            g.params.w.add_outer_concat(&dz, &s.h_prev, &s.x);
            linalg::axpy(1.0, &dz, &mut g.params.b);
            dconcat.fill(0.0);
            self.w.add_transpose_mul(&dz, &mut dconcat);
            dh.copy_from_slice(&dconcat[..hidden]);
            let dx = &dconcat[hidden..];
            let row = g
                .embedding
                .entry(token)
                .or_insert_with(|| vec![0.0; dx.len()]);
            linalg::axpy(1.0, dx, row);
        }
        Ok(g)
    }

    fn zeros_like(&self) -> Self {
        RnnParams::zeros(self.hidden(), self.input(), RnnParams::classes(self))
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        TENSOR_NAMES
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w.as_slice(),
            &self.b,
            self.head_w.as_slice(),
            &self.head_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w.as_mut_slice(),
            &mut self.b,
            self.head_w.as_mut_slice(),
            &mut self.head_b,
        ]
    }
}

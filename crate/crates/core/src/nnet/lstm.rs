use rand::Rng;

use super::{
    check_embedding, check_finite, check_label, embed, head_backward, head_forward, ForwardTrace,
    Gradients, NnetError, SequenceModel,
};
use crate::corpus::PAD_INDEX;
use crate::embedding::EmbeddingMatrix;
use crate::linalg::{self, sigmoid, Matrix};

/// Single-layer LSTM with a dense softmax head.
///
/// Each gate matrix is `hidden × (hidden + input)` and multiplies the
/// concatenation `[h_{t-1}, x_t]`, hidden part first:
///
/// ```text
/// f_t = σ(W_f·[h_{t-1}, x_t] + b_f)
/// i_t = σ(W_i·[h_{t-1}, x_t] + b_i)
/// ĉ_t = tanh(W_c·[h_{t-1}, x_t] + b_c)
/// c_t = f_t ⊙ c_{t-1} + i_t ⊙ ĉ_t
/// o_t = σ(W_o·[h_{t-1}, x_t] + b_o)
/// h_t = o_t ⊙ tanh(c_t)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_c: Matrix,
    pub b_c: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

const TENSOR_NAMES: &[&str] = &[
    "w_f", "b_f", "w_i", "b_i", "w_c", "b_c", "w_o", "b_o", "head_w", "head_b",
];

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize, classes: usize) -> Self {
        let gate = || Matrix::zeros(hidden, hidden + input);
        LstmParams {
            w_f: gate(),
            b_f: vec![0.0; hidden],
            w_i: gate(),
            b_i: vec![0.0; hidden],
            w_c: gate(),
            b_c: vec![0.0; hidden],
            w_o: gate(),
            b_o: vec![0.0; hidden],
            head_w: Matrix::zeros(classes, hidden),
            head_b: vec![0.0; classes],
        }
    }

    /// Gate matrices uniform in `±1/√(hidden + input)`, head weights uniform
    /// in `±1/√hidden`, forget bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(hidden: usize, input: usize, classes: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((hidden + input) as f64).sqrt();
        let mut p = Self::zeros(hidden, input, classes);
        p.w_f = Matrix::uniform(hidden, hidden + input, bound, rng);
        p.w_i = Matrix::uniform(hidden, hidden + input, bound, rng);
        p.w_c = Matrix::uniform(hidden, hidden + input, bound, rng);
        p.w_o = Matrix::uniform(hidden, hidden + input, bound, rng);
        p.head_w = Matrix::uniform(classes, hidden, 1.0 / (hidden as f64).sqrt(), rng);
        p.b_f.fill(1.0);
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_f.rows()
    }

    pub fn input(&self) -> usize {
        self.w_f.cols() - self.w_f.rows()
    }

    pub fn classes(&self) -> usize {
        self.head_w.rows()
    }

    /// Checks that every tensor is finite and the shapes agree.
    pub fn validate(&self) -> Result<(), NnetError> {
        let (h, cols) = (self.hidden(), self.w_f.cols());
        for (name, w, b) in [
            ("w_f", &self.w_f, &self.b_f),
            ("w_i", &self.w_i, &self.b_i),
            ("w_c", &self.w_c, &self.b_c),
            ("w_o", &self.w_o, &self.b_o),
        ] {
            if w.rows() != h || w.cols() != cols || b.len() != h {
                return Err(NnetError::Shape(format!("{name} is not {h}×{cols}")));
            }
        }
        if self.head_w.cols() != h || self.head_b.len() != self.classes() {
            return Err(NnetError::Shape("head does not match hidden size".into()));
        }
        for t in self.tensors() {
            check_finite(t, "lstm parameters")?;
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
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one timestep needs for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Pre-activations of the forget, input, candidate and output paths.
    pub z_f: Vec<f64>,
    pub z_i: Vec<f64>,
    pub z_c: Vec<f64>,
    pub z_o: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM timestep. Fails on non-finite input or state rather than
/// letting NaN propagate.
pub fn lstm_step(
    params: &LstmParams,
    state: &LstmState,
    x: &[f64],
) -> Result<(LstmState, LstmStepCache), NnetError> {
    let hidden = params.hidden();
    if x.len() != params.input() || state.h.len() != hidden || state.c.len() != hidden {
        return Err(NnetError::Shape(format!(
            "lstm_step expects input {} and state {hidden}",
            params.input()
        )));
    }
    check_finite(x, "lstm input")?;
    check_finite(&state.h, "lstm hidden state")?;
    check_finite(&state.c, "lstm cell state")?;

    let affine = |w: &Matrix, b: &[f64]| {
        let mut z = vec![0.0; hidden];
        w.affine_concat(&state.h, x, b, &mut z);
        z
    };
    let z_f = affine(&params.w_f, &params.b_f);
    let z_i = affine(&params.w_i, &params.b_i);
    let z_c = affine(&params.w_c, &params.b_c);
    let z_o = affine(&params.w_o, &params.b_o);

    let f: Vec<f64> = z_f.iter().map(|&z| sigmoid(z)).collect();
    let i: Vec<f64> = z_i.iter().map(|&z| sigmoid(z)).collect();
    let c_hat: Vec<f64> = z_c.iter().map(|z| z.tanh()).collect();
    let o: Vec<f64> = z_o.iter().map(|&z| sigmoid(z)).collect();
    let c: Vec<f64> = (0..hidden)
        .map(|k| f[k] * state.c[k] + i[k] * c_hat[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();

    let next = LstmState {
        h: h.clone(),
        c: c.clone(),
    };
    let cache = LstmStepCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        z_f,
        z_i,
        z_c,
        z_o,
        f,
        i,
        c_hat,
        o,
        c,
        tanh_c,
        h,
    };
    Ok((next, cache))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmTrace {
    /// Token index of each non-masked timestep.
    pub tokens: Vec<usize>,
    pub steps: Vec<LstmStepCache>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ForwardTrace for LstmTrace {
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

impl SequenceModel for LstmParams {
    type Trace = LstmTrace;

    fn classes(&self) -> usize {
        LstmParams::classes(self)
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
    ) -> Result<LstmTrace, NnetError> {
        check_embedding(embedding, self.input())?;
        let mut state = LstmState::zeros(self.hidden());
        let mut tokens = Vec::new();
        let mut steps = Vec::new();
        for &idx in indices {
            if idx == PAD_INDEX {
                continue;
            }
            let x = embed(embedding, idx)?;
            let (next, cache) = lstm_step(self, &state, x)?;
            state = next;
            tokens.push(idx);
            steps.push(cache);
        }
        if steps.is_empty() {
            return Err(NnetError::EmptySequence);
        }
        let (logits, probabilities) = head_forward(&self.head_w, &self.head_b, &state.h);
        check_finite(&logits, "logits")?;
        Ok(LstmTrace {
            tokens,
            steps,
            logits,
            probabilities,
        })
    }

    fn backward(&self, trace: &LstmTrace, label: usize) -> Result<Gradients<Self>, NnetError> {
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
        let mut dc = vec![0.0; hidden];
        let mut dz_f = vec![0.0; hidden];
        let mut dz_i = vec![0.0; hidden];
        let mut dz_c = vec![0.0; hidden];
        let mut dz_o = vec![0.0; hidden];
        let mut dconcat = vec![0.0; self.w_f.cols()];

        for (s, &token) in trace.steps.iter().zip(&trace.tokens).rev() {
            for k in 0..hidden {
                let d_o = dh[k] * s.tanh_c[k];
                dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                dz_f[k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                dz_i[k] = dc[k] * s.c_hat[k] * s.i[k] * (1.0 - s.i[k]);
                dz_c[k] = dc[k] * s.i[k] * (1.0 - s.c_hat[k] * s.c_hat[k]);
                dz_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
                // Carry to c_{t-1}.
                dc[k] *= s.f[k];
            }
            let gp = &mut g.params;
            for (gw, gb, dz) in [
                (&mut gp.w_f, &mut gp.b_f, &dz_f),
                (&mut gp.w_i, &mut gp.b_i, &dz_i),
                (&mut gp.w_c, &mut gp.b_c, &dz_c),
                (&mut gp.w_o, &mut gp.b_o, &dz_o),
            ] {
                gw.add_outer_concat(dz, &s.h_prev, &s.x);
                linalg::axpy(1.0, dz, gb);
            }

            dconcat.fill(0.0);
            self.w_f.add_transpose_mul(&dz_f, &mut dconcat);
            self.w_i.add_transpose_mul(&dz_i, &mut dconcat);
            self.w_c.add_transpose_mul(&dz_c, &mut dconcat);
            self.w_o.add_transpose_mul(&dz_o, &mut dconcat);
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
        LstmParams::zeros(self.hidden(), self.input(), LstmParams::classes(self))
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        TENSOR_NAMES
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_f.as_slice(),
            &self.b_f,
            self.w_i.as_slice(),
            &self.b_i,
            self.w_c.as_slice(),
            &self.b_c,
            self.w_o.as_slice(),
            &self.b_o,
            self.head_w.as_slice(),
            &self.head_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_f.as_mut_slice(),
            &mut self.b_f,
            self.w_i.as_mut_slice(),
            &mut self.b_i,
            self.w_c.as_mut_slice(),
            &mut self.b_c,
            self.w_o.as_mut_slice(),
            &mut self.b_o,
            self.head_w.as_mut_slice(),
            &mut self.head_b,
        ]
    }
}

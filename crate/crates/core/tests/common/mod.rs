#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use senti::corpus::Vocabulary;
use senti::embedding::EmbeddingMatrix;
use senti::eval::ConfusionMatrix3;
use senti::linalg::Matrix;
use senti::nnet::{ForwardTrace, LstmParams, RnnParams, SequenceModel};

/// `|a - n| / max(|a|, |n|)`, or the absolute gap when both are below
/// `floor` (where a ratio of round-off carries no information).
pub fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < floor {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

pub fn vocab(tokens: usize) -> Vocabulary {
    let names: Vec<String> = (0..tokens).map(|i| format!("t{i}")).collect();
    Vocabulary::build([names], 1).unwrap()
}

fn scramble(m: &mut [f64], bound: f64, rng: &mut ChaCha8Rng) {
    for v in m {
        *v = rng.gen_range(-bound..bound);
    }
}

/// LSTM with every tensor (biases included) uniform in `±bound`.
pub fn random_lstm(hidden: usize, input: usize, bound: f64, rng: &mut ChaCha8Rng) -> LstmParams {
    let mut p = LstmParams::zeros(hidden, input, 3);
    for t in p.tensors_mut() {
        scramble(t, bound, rng);
    }
    p
}

pub fn random_rnn(hidden: usize, input: usize, bound: f64, rng: &mut ChaCha8Rng) -> RnnParams {
    let mut p = RnnParams::zeros(hidden, input, 3);
    for t in p.tensors_mut() {
        scramble(t, bound, rng);
    }
    p
}

pub struct Instance {
    pub vocab: Vocabulary,
    pub embedding: EmbeddingMatrix,
    pub indices: Vec<usize>,
    pub label: usize,
}

/// Random embedding over `tokens` words and a `seq`-token sequence
/// (repeats allowed) followed by `pads` padding positions.
pub fn instance(
    tokens: usize,
    dim: usize,
    seq: usize,
    pads: usize,
    rng: &mut ChaCha8Rng,
) -> Instance {
    let vocab = vocab(tokens);
    let embedding = EmbeddingMatrix::random(&vocab, dim, 1.0, rng);
    let mut indices: Vec<usize> = (0..seq).map(|_| rng.gen_range(1..vocab.len())).collect();
    indices.extend(std::iter::repeat_n(0, pads));
    Instance {
        vocab,
        embedding,
        indices,
        label: rng.gen_range(0..3),
    }
}

pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
    pub worst: String,
}

/// Compares `backward` against central differences of the forward loss
/// for every parameter entry and every entry of every touched embedding
/// row.
pub fn finite_difference_check<M: SequenceModel>(
    model: &M,
    inst: &Instance,
    step: f64,
) -> GradCheck {
    let loss = |m: &M, e: &EmbeddingMatrix| m.forward(e, &inst.indices).unwrap().loss(inst.label);
    let trace = model.forward(&inst.embedding, &inst.indices).unwrap();
    let grads = model.backward(&trace, inst.label).unwrap();
    let mut out = GradCheck {
        max_rel: 0.0,
        checked: 0,
        worst: String::new(),
    };
    let mut record = |a: f64, n: f64, what: String| {
        let r = rel_error(a, n, 1e-7);
        out.checked += 1;
        if r > out.max_rel {
            out.max_rel = r;
            out.worst = format!("{what}: analytic {a:e}, numeric {n:e}");
        }
    };

    let analytic: Vec<Vec<f64>> = grads.params.tensors().iter().map(|t| t.to_vec()).collect();
    for (ti, name) in model.tensor_names().iter().enumerate() {
        for k in 0..analytic[ti].len() {
            let mut plus = model.clone();
            plus.tensors_mut()[ti][k] += step;
            let mut minus = model.clone();
            minus.tensors_mut()[ti][k] -= step;
            let n = (loss(&plus, &inst.embedding) - loss(&minus, &inst.embedding)) / (2.0 * step);
            record(analytic[ti][k], n, format!("{name}[{k}]"));
        }
    }

    let mut touched: Vec<usize> = inst.indices.iter().copied().filter(|&i| i != 0).collect();
    touched.sort_unstable();
    touched.dedup();
    assert_eq!(touched, grads.embedding.keys().copied().collect::<Vec<_>>());
    for &row in &touched {
        for j in 0..inst.embedding.dim() {
            let mut plus = inst.embedding.clone();
            plus.matrix_mut().row_mut(row)[j] += step;
            let mut minus = inst.embedding.clone();
            minus.matrix_mut().row_mut(row)[j] -= step;
            let n = (loss(model, &plus) - loss(model, &minus)) / (2.0 * step);
            record(
                grads.embedding[&row][j],
                n,
                format!("embedding[{row}][{j}]"),
            );
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Plain-loop LSTM cell written straight from the gate equations, with
/// the concatenation `[h_prev, x]` spelled out index by index.
pub fn scalar_lstm_step(
    p: &LstmParams,
    h_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hn = h_prev.len();
    let gate = |w: &Matrix, b: &[f64], k: usize| {
        let mut s = b[k];
        for j in 0..hn {
            s += w.get(k, j) * h_prev[j];
        }
        for j in 0..x.len() {
            s += w.get(k, hn + j) * x[j];
        }
        s
    };
    let mut h = vec![0.0; hn];
    let mut c = vec![0.0; hn];
    for k in 0..hn {
        let f = sigmoid(gate(&p.w_f, &p.b_f, k));
        let i = sigmoid(gate(&p.w_i, &p.b_i, k));
        let cand = gate(&p.w_c, &p.b_c, k).tanh();
        let o = sigmoid(gate(&p.w_o, &p.b_o, k));
        c[k] = f * c_prev[k] + i * cand;
        h[k] = o * c[k].tanh();
    }
    (h, c)
}

pub struct BruteMetrics {
    pub accuracy: f64,
    pub per_class: [(f64, f64, f64); 3],
    pub macro_avg: (f64, f64, f64),
    pub weighted: (f64, f64, f64),
    pub micro: (f64, f64, f64),
}

/// Metrics recomputed by expanding the confusion matrix into label lists
/// and counting, independent of the library's one-vs-rest reduction.
pub fn brute_metrics(cm: &ConfusionMatrix3) -> BruteMetrics {
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for a in 0..3 {
        for p in 0..3 {
            for _ in 0..cm.counts[a][p] {
                actual.push(a);
                predicted.push(p);
            }
        }
    }
    let n = actual.len();
    let safe = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let pairs = || actual.iter().zip(predicted.iter());
    let correct = pairs().filter(|(a, p)| a == p).count();
    let mut per_class = [(0.0, 0.0, 0.0); 3];
    let mut support = [0usize; 3];
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for k in 0..3 {
        let tp = pairs().filter(|(a, p)| **a == k && **p == k).count();
        let fp = pairs().filter(|(a, p)| **a != k && **p == k).count();
        let fn_ = pairs().filter(|(a, p)| **a == k && **p != k).count();
        support[k] = actual.iter().filter(|a| **a == k).count();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let prec = safe(tp as f64, (tp + fp) as f64);
        let rec = safe(tp as f64, (tp + fn_) as f64);
        per_class[k] = (prec, rec, safe(2.0 * prec * rec, prec + rec));
    }
    let mut macro_avg = (0.0, 0.0, 0.0);
    let mut weighted = (0.0, 0.0, 0.0);
    for k in 0..3 {
        macro_avg.0 += per_class[k].0 / 3.0;
        macro_avg.1 += per_class[k].1 / 3.0;
        macro_avg.2 += per_class[k].2 / 3.0;
        let w = support[k] as f64 / n as f64;
        weighted.0 += w * per_class[k].0;
        weighted.1 += w * per_class[k].1;
        weighted.2 += w * per_class[k].2;
    }
    let mp = safe(tp_all as f64, (tp_all + fp_all) as f64);
    let mr = safe(tp_all as f64, (tp_all + fn_all) as f64);
    BruteMetrics {
        accuracy: correct as f64 / n as f64,
        per_class,
        macro_avg,
        weighted,
        micro: (mp, mr, safe(2.0 * mp * mr, mp + mr)),
    }
}

pub fn random_confusion(rng: &mut ChaCha8Rng) -> ConfusionMatrix3 {
    let mut counts = [[0u64; 3]; 3];
    let max = [1u64, 3, 20, 200][rng.gen_range(0..4)];
    loop {
        for row in counts.iter_mut() {
            for v in row.iter_mut() {
                // Sprinkle zeros so empty rows and columns occur.
                *v = if rng.gen_bool(0.3) {
                    0
                } else {
                    rng.gen_range(0..=max)
                };
            }
        }
        if counts.iter().flatten().sum::<u64>() > 0 {
            return ConfusionMatrix3::from_counts(counts);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

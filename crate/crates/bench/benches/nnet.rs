use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use senti::nnet::{lstm_step, LstmParams, LstmState, RnnParams, SequenceModel};
use senti_bench::{fixture, rng, sequence};

const DIM: usize = 100;
const HIDDEN: usize = 50;

fn step(c: &mut Criterion) {
    let p = LstmParams::init(HIDDEN, DIM, 3, &mut rng(1));
    let state = LstmState::zeros(HIDDEN);
    let x = vec![0.1; DIM];
    c.bench_function("lstm_step h50 d100", |b| {
        b.iter(|| lstm_step(black_box(&p), black_box(&state), black_box(&x)).unwrap())
    });
}

fn forward_backward(c: &mut Criterion) {
    let (vocab, emb) = fixture(2000, DIM, 2);
    let lstm = LstmParams::init(HIDDEN, DIM, 3, &mut rng(3));
    let rnn = RnnParams::init(HIDDEN, DIM, 3, &mut rng(4));
    let mut g = c.benchmark_group("sequence");
    for len in [25, 100] {
        let seq = sequence(&vocab, len, 100, 5);
        g.bench_with_input(BenchmarkId::new("lstm_forward", len), &seq, |b, s| {
            b.iter(|| lstm.forward(&emb, black_box(s)).unwrap())
        });
        let trace = lstm.forward(&emb, &seq).unwrap();
        g.bench_with_input(BenchmarkId::new("lstm_backward", len), &trace, |b, t| {
            b.iter(|| lstm.backward(black_box(t), 1).unwrap())
        });
        g.bench_with_input(
            BenchmarkId::new("rnn_forward_backward", len),
            &seq,
            |b, s| {
                b.iter(|| {
                    let t = rnn.forward(&emb, black_box(s)).unwrap();
                    rnn.backward(&t, 1).unwrap()
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, step, forward_backward);
criterion_main!(benches);

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::Rng;

use common::{brute_metrics, random_confusion, rng};
use senti::baselines::{feature_count, nb_fit, tfidf_fit, TfidfNorm};
use senti::corpus::{
    clean_text, encode, encode_example, stratified_split, EncodedExample, Sentiment, Vocabulary,
    PAD_INDEX, RESERVED, UNK_INDEX,
};
use senti::embedding::{generate_pairs, NegativeSampler};
use senti::eval::{metrics, Averaging, ConfusionMatrix3};

fn token() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "a", "b", "c", "dd", "ee", "猫", "狗", "x1", "y2", "zz",
    ])
    .prop_map(String::from)
}

fn documents() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(token(), 0..12), 1..15)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cleaning_is_idempotent(s in "[a-z #@:/.!?,，。！？、http w]{0,40}|\\PC{0,40}") {
        let once = clean_text(&s);
        prop_assert_eq!(clean_text(&once), once.clone());
        prop_assert!(!once.contains("  "));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn encoding_has_fixed_length_and_pad_suffix(docs in documents(), maxlen in 1usize..10) {
        let vocab = Vocabulary::build(&docs, 1).unwrap();
        for d in &docs {
            let e = encode_example(d, Sentiment::Neutral, &vocab, maxlen).unwrap();
            prop_assert_eq!(e.indices.len(), maxlen);
            prop_assert_eq!(e.original_length, d.len().min(maxlen));
            prop_assert!(e.indices[..e.original_length].iter().all(|&i| i != PAD_INDEX));
            prop_assert!(e.indices[e.original_length..].iter().all(|&i| i == PAD_INDEX));
            // Truncation keeps the head.
            let longer = encode(d, &vocab, maxlen + 5).unwrap();
            prop_assert_eq!(&longer[..maxlen], &e.indices[..]);
        }
    }

    #[test]
    fn vocabulary_matches_a_brute_force_count(docs in documents(), min_count in 1u64..4) {
        let vocab = Vocabulary::build(&docs, min_count).unwrap();
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for d in &docs {
            for t in d {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        prop_assert_eq!(vocab.len(), kept.len() + RESERVED);
        for (i, (tok, c)) in kept.iter().enumerate() {
            prop_assert_eq!(vocab.index(tok), Some(i + RESERVED));
            prop_assert_eq!(vocab.token(i + RESERVED), Some(*tok));
            prop_assert_eq!(vocab.frequency(tok), Some(*c));
        }
        prop_assert_eq!(vocab.index_or_unk("never-seen"), UNK_INDEX);
        let round = Vocabulary::from_text(&vocab.to_text()).unwrap();
        prop_assert_eq!(round, vocab);
    }

    #[test]
    fn stratified_split_partitions(labels in prop::collection::vec(0usize..3, 2..80), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let items: Vec<(usize, Sentiment)> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, Sentiment::from_index(l).unwrap()))
            .collect();
        let per_class = |xs: &[(usize, Sentiment)], k: usize| xs.iter().filter(|x| x.1.index() == k).count();
        let result = stratified_split(&items, |x| x.1, frac, seed);
        if (0..3).any(|k| per_class(&items, k) == 1) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let (train, test) = result.unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).map(|x| x.0).collect();
        prop_assert!(train.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(test.windows(2).all(|w| w[0].0 < w[1].0));
        all.sort_unstable();
        prop_assert_eq!(all, (0..items.len()).collect::<Vec<_>>());
        for k in 0..3 {
            let n = per_class(&items, k);
            if n > 0 {
                let want = ((n as f64 * frac).round() as usize).clamp(1, n - 1);
                prop_assert_eq!(per_class(&test, k), want);
            }
        }
    }
}

#[test]
fn metric_invariants_on_random_matrices() {
    let mut r = rng(20);
    for _ in 0..10_000 {
        let cm = random_confusion(&mut r);
        let m = metrics(&cm, Averaging::Macro).unwrap();
        let total = cm.total();
        for k in 0..3 {
            let b = cm.per_class_binary(k);
            assert_eq!(b.tp + b.fp + b.fn_ + b.tn, total);
        }
        let ratios = [m.accuracy]
            .into_iter()
            .chain(
                m.per_class
                    .iter()
                    .flat_map(|c| [c.precision, c.recall, c.f1]),
            )
            .chain(
                [m.macro_avg, m.micro_avg, m.weighted_avg]
                    .into_iter()
                    .flat_map(|a| [a.precision, a.recall, a.f1]),
            );
        for v in ratios {
            assert!(
                (0.0..=1.0).contains(&v),
                "{v} out of range for {:?}",
                cm.counts
            );
        }

        // Relabel classes with a random permutation.
        let mut perm = [0usize, 1, 2];
        for i in (1..3).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let mut moved = [[0u64; 3]; 3];
        for a in 0..3 {
            for p in 0..3 {
                moved[perm[a]][perm[p]] = cm.counts[a][p];
            }
        }
        let pm = metrics(&ConfusionMatrix3::from_counts(moved), Averaging::Macro).unwrap();
        assert_eq!(pm.accuracy, m.accuracy);
        assert!((pm.macro_avg.f1 - m.macro_avg.f1).abs() < 1e-12);
        assert!((pm.macro_avg.precision - m.macro_avg.precision).abs() < 1e-12);
        for k in 0..3 {
            assert_eq!(pm.per_class[perm[k]].f1, m.per_class[k].f1);
        }
    }
}

#[test]
fn macro_f1_matches_brute_force_on_fixed_matrix() {
    let cm = ConfusionMatrix3::from_counts([[5, 2, 0], [1, 3, 4], [0, 0, 6]]);
    let m = metrics(&cm, Averaging::Macro).unwrap();
    let b = brute_metrics(&cm);
    assert!((m.macro_avg.f1 - b.macro_avg.2).abs() < 1e-12);
    // Hand computed: P = (5/6, 3/5, 6/10), R = (5/7, 3/8, 6/6).
    let f = |p: f64, r: f64| 2.0 * p * r / (p + r);
    let want = (f(5.0 / 6.0, 5.0 / 7.0) + f(0.6, 0.375) + f(0.6, 1.0)) / 3.0;
    assert!((m.macro_avg.f1 - want).abs() < 1e-12);
}

fn random_docs(
    r: &mut rand_chacha::ChaCha8Rng,
    n: usize,
    vocab_rows: usize,
) -> Vec<EncodedExample> {
    (0..n)
        .map(|i| {
            let len = r.gen_range(1..8);
            let mut indices: Vec<usize> = (0..len).map(|_| r.gen_range(1..vocab_rows)).collect();
            indices.resize(10, PAD_INDEX);
            EncodedExample {
                indices,
                label: Sentiment::from_index(i % 3).unwrap(),
                original_length: len,
            }
        })
        .collect()
}

#[test]
fn tfidf_matches_formula() {
    let mut r = rng(21);
    let rows = 9;
    let features = feature_count(rows);
    let docs = random_docs(&mut r, 20, rows);
    for sublinear in [false, true] {
        let m = tfidf_fit(
            docs.iter().map(|d| d.indices.as_slice()),
            features,
            sublinear,
            TfidfNorm::L2,
        )
        .unwrap();
        for d in &docs {
            let got = m.transform(&d.indices).unwrap();
            let mut dense = vec![0.0; features];
            for f in 0..features {
                let tok = f + 1;
                let tf = d.tokens().iter().filter(|&&i| i == tok).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|e| e.tokens().contains(&tok)).count() as f64;
                let idf = ((1.0 + 20.0) / (1.0 + df)).ln() + 1.0;
                dense[f] = if sublinear { 1.0 + tf.ln() } else { tf } * idf;
            }
            let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut norm_sq = 0.0;
            for &(f, v) in &got {
                assert!((v - dense[f] / norm).abs() < 1e-12);
                norm_sq += v * v;
            }
            assert_eq!(got.len(), dense.iter().filter(|v| **v != 0.0).count());
            assert!((norm_sq.sqrt() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn naive_bayes_matches_bayes_rule_enumeration() {
    let mut r = rng(22);
    let rows = 7;
    let features = feature_count(rows);
    let docs = random_docs(&mut r, 15, rows);
    let alpha = 0.7;
    let m = nb_fit(&docs, features, alpha).unwrap();
    for k in 0..3 {
        let s: f64 = m.log_likelihoods.row(k).iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
    let test = random_docs(&mut r, 10, rows);
    for d in &test {
        let mut joint = [0.0; 3];
        for (k, j) in joint.iter_mut().enumerate() {
            let members: Vec<&EncodedExample> =
                docs.iter().filter(|e| e.label.index() == k).collect();
            let total: usize = members.iter().map(|e| e.tokens().len()).sum();
            *j = members.len() as f64 / docs.len() as f64;
            for &tok in d.tokens() {
                let c = members
                    .iter()
                    .map(|e| e.tokens().iter().filter(|&&i| i == tok).count())
                    .sum::<usize>() as f64;
                *j *= (c + alpha) / (total as f64 + alpha * features as f64);
            }
        }
        let z: f64 = joint.iter().sum();
        let got = m.predict_proba(&d.indices).unwrap();
        for k in 0..3 {
            assert!((got[k] - joint[k] / z).abs() < 1e-10);
        }
    }
}

#[test]
fn negative_sampler_follows_smoothed_unigram() {
    let docs: Vec<Vec<String>> = vec![(0..10)
        .flat_map(|i| std::iter::repeat_n(format!("w{i}"), 1 + i * i))
        .collect()];
    let vocab = Vocabulary::build(&docs, 1).unwrap();
    let sampler = NegativeSampler::new(&vocab).unwrap();
    let weights: Vec<f64> = (RESERVED..vocab.len())
        .map(|i| (vocab.frequency_at(i) as f64).powf(0.75))
        .collect();
    let total: f64 = weights.iter().sum();

    let draws = 1_000_000;
    let mut counts = vec![0u64; vocab.len()];
    let mut r = rng(23);
    for _ in 0..draws {
        counts[sampler.sample(&mut r)] += 1;
    }
    assert_eq!(counts[PAD_INDEX] + counts[UNK_INDEX], 0);
    let mut chi2 = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let p = w / total;
        assert!((sampler.probability(i + RESERVED) - p).abs() < 1e-15);
        let expected = p * draws as f64;
        let observed = counts[i + RESERVED] as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    // 9 degrees of freedom; 27.877 is the 0.999 quantile.
    assert!(chi2 < 27.877, "chi-square {chi2}");
}

#[test]
fn skipgram_pairs_respect_window_and_exclusions() {
    let corpus = vec![vec![2, 3, 1, 4, 5, 6, 7], vec![3, 4]];
    let pairs = generate_pairs(&corpus, 2, 0, false);
    // Brute force: reserved tokens are removed first, so the unknown at
    // position 2 brings 3 and 4 next to each other.
    let mut want = Vec::new();
    for s in &corpus {
        let kept: Vec<usize> = s.iter().copied().filter(|&i| i >= RESERVED).collect();
        for (i, &c) in kept.iter().enumerate() {
            for (j, &x) in kept.iter().enumerate() {
                if i != j && i.abs_diff(j) <= 2 {
                    want.push((c, x));
                }
            }
        }
    }
    assert!(pairs.contains(&(3, 5)));
    let mut got = pairs.clone();
    got.sort_unstable();
    want.sort_unstable();
    assert_eq!(got, want);
    let dynamic = generate_pairs(&corpus, 2, 0, true);
    assert!(dynamic.len() <= pairs.len());
    assert_eq!(dynamic, generate_pairs(&corpus, 2, 0, true));
}

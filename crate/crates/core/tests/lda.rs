use absa_core::lda::{fit_lda, fit_lda_observed, LdaModel, LdaParams};
use absa_core::rng;
use absa_core::textprep::TokenList;
use proptest::prelude::*;

/// Half the documents draw only from vocabulary A, half only from B.
fn two_vocab_corpus(seed: u64, docs: usize, len: usize) -> Vec<TokenList> {
    let mut r = rng::stream(seed, 99);
    (0..docs)
        .map(|d| {
            let prefix = if d % 2 == 0 { "a" } else { "b" };
            (0..len).map(|_| format!("{prefix}{}", rng::index(&mut r, 12))).collect()
        })
        .collect()
}

fn params(topics: usize, iterations: usize) -> LdaParams {
    LdaParams {
        topics,
        iterations,
        ..LdaParams::default()
    }
}

/// Share of A-tokens assigned to the most common topic among A-tokens,
/// whichever label it has.
fn purity(model: &LdaModel, docs: &[TokenList], prefix: char) -> f64 {
    let mut counts = vec![0usize; model.params.topics];
    for (doc, z) in docs.iter().zip(model.assignments()) {
        for (tok, &k) in doc.iter().zip(z) {
            if tok.starts_with(prefix) {
                counts[k as usize] += 1;
            }
        }
    }
    *counts.iter().max().unwrap() as f64 / counts.iter().sum::<usize>() as f64
}

#[test]
fn disjoint_vocabularies_separate() {
    for seed in 0..5 {
        let docs = two_vocab_corpus(seed, 60, 40);
        let m = fit_lda(&docs, params(2, 200), seed).unwrap();
        for prefix in ['a', 'b'] {
            let p = purity(&m, &docs, prefix);
            assert!(p >= 0.9, "seed {seed} vocab {prefix}: purity {p}");
        }
    }
}

#[test]
fn counts_conserved_every_sweep() {
    let docs = two_vocab_corpus(3, 20, 15);
    let total: usize = docs.iter().map(Vec::len).sum();
    fit_lda_observed(&docs, params(4, 30), 3, |_, m| {
        for (row, len) in m.doc_topic_counts().iter().zip(m.doc_lengths()) {
            assert_eq!(row.iter().map(|&c| c as usize).sum::<usize>(), len);
        }
        let by_topic: u64 = m.topic_word_counts().iter().flatten().map(|&c| u64::from(c)).sum();
        assert_eq!(by_topic, total as u64);
        assert_eq!(m.total_tokens(), total as u64);
    })
    .unwrap();
}

#[test]
fn fixed_seed_is_deterministic() {
    let docs = two_vocab_corpus(8, 30, 20);
    let a = fit_lda(&docs, params(5, 50), 42).unwrap();
    let b = fit_lda(&docs, params(5, 50), 42).unwrap();
    assert_eq!(a.assignments(), b.assignments());
    assert_eq!(a.top_words(10), b.top_words(10));
}

#[test]
fn log_likelihood_rises_early() {
    for seed in 0..5 {
        let docs = two_vocab_corpus(seed + 100, 60, 40);
        let mut trace = Vec::new();
        fit_lda_observed(&docs, params(5, 50), seed, |_, m| trace.push(m.log_likelihood())).unwrap();
        let smoothed: Vec<f64> = trace.chunks(5).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let mean_step = (smoothed[smoothed.len() - 1] - smoothed[0]) / (smoothed.len() - 1) as f64;
        assert!(mean_step >= 0.0, "seed {seed}: {smoothed:?}");
        // Late blocks fluctuate around the stationary level but never fall
        // back to the random-initialization level.
        assert!(smoothed[1..].iter().all(|&v| v > smoothed[0]), "seed {seed}: {smoothed:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn topic_distributions_sum_to_one(seed in 0u64..1000, topics in 1usize..6) {
        let docs = two_vocab_corpus(seed, 10, 12);
        let m = fit_lda(&docs, params(topics, 5), seed).unwrap();
        for k in 0..topics {
            let s: f64 = m.topic_distribution(k).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(m.top_words(10).len(), topics);
    }
}

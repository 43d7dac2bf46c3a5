use std::collections::HashSet;

use drskit::metrics::{corpus_bleu, err_rate, word_overlap, Smoothing};
use drskit::synth::random_sbn;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g", "!", "."]),
        0..max,
    )
    .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn non_empty_tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]), 1..max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn set_jaccard(a: &[String], b: &[String]) -> f64 {
    let a: HashSet<&String> = a.iter().collect();
    let b: HashSet<&String> = b.iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

#[test]
fn chocolate_pair_identity_and_disjoint() {
    let a = ["I", "like", "chocolate", "ice", "cream", "!"];
    let b = ["I", "like", "chocolate", "ice", "cream", "."];
    assert!((word_overlap(&a, &b) - 5.0 / 7.0).abs() < 1e-12);
    assert_eq!(word_overlap(&a, &a), 1.0);
    assert_eq!(word_overlap(&a, &["you", "hate", "tea"]), 0.0);
}

#[test]
fn err_rate_two_of_hundred() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut outputs: Vec<String> = (0..98)
        .map(|_| drskit::sbn::serialize_sbn(&random_sbn(&mut rng, 8)))
        .collect();
    outputs.insert(10, "this is not sbn".into());
    outputs.insert(70, "person.n.01 Agent +5".into());
    assert_eq!(err_rate(&outputs), 2.0);
}

proptest! {
    #[test]
    fn overlap_is_a_bounded_symmetric_jaccard(a in tokens(12), b in tokens(12)) {
        let ab = word_overlap(&a, &b);
        prop_assert_eq!(ab, word_overlap(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - set_jaccard(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_reflexive(a in non_empty_tokens(12)) {
        prop_assert_eq!(word_overlap(&a, &a), 1.0);
    }

    #[test]
    fn bleu_of_a_corpus_against_itself_is_one(hyps in prop::collection::vec(non_empty_tokens(10), 1..8)) {
        let r = corpus_bleu(&hyps, &hyps, 4, Smoothing::None).unwrap();
        prop_assert!((r.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_ignores_pair_order(
        pairs in prop::collection::vec((non_empty_tokens(10), non_empty_tokens(10)), 1..8),
        rotate in 0usize..8,
    ) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let mut moved = pairs.clone();
        let k = rotate % moved.len();
        moved.rotate_left(k);
        moved.reverse();
        let (h2, r2): (Vec<_>, Vec<_>) = moved.into_iter().unzip();
        let a = corpus_bleu(&h, &r, 4, Smoothing::AddOne).unwrap();
        let b = corpus_bleu(&h2, &r2, 4, Smoothing::AddOne).unwrap();
        prop_assert!((a.score - b.score).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.score));
    }

    #[test]
    fn err_rate_counts_parse_failures(seed in any::<u64>(), n in 1usize..60, bad in prop::collection::vec(any::<bool>(), 60)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outputs: Vec<String> = (0..n)
            .map(|i| {
                if bad[i] {
                    format!("garbage line {i} +{}", i + 99)
                } else {
                    drskit::sbn::serialize_sbn(&random_sbn(&mut rng, 8))
                }
            })
            .collect();
        let failures = bad[..n].iter().filter(|&&b| b).count();
        let rate = err_rate(&outputs);
        prop_assert!((0.0..=100.0).contains(&rate));
        prop_assert!((rate - 100.0 * failures as f64 / n as f64).abs() < 1e-9);
    }
}

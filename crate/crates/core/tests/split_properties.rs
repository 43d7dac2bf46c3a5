use std::collections::HashSet;

use drskit::corpus::Document;
use drskit::metrics::overlap_report;
use drskit::split::{random_split, systematic_split, Method, Ratio, Split, SplitAssignment, SplitPolicy};
use drskit::synth::{near_duplicate_corpus, random_corpus};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tsv(a: &SplitAssignment) -> Vec<u8> {
    let mut out = Vec::new();
    a.write_tsv(&[], &mut out).unwrap();
    out
}

fn assert_partition(docs: &[Document], a: &SplitAssignment) {
    assert_eq!(a.len(), docs.len());
    let parts: Vec<HashSet<&str>> = Split::ALL.iter().map(|&s| a.ids(s).collect()).collect();
    for d in docs {
        let owners = parts.iter().filter(|p| p.contains(d.id.as_str())).count();
        assert_eq!(owners, 1, "{} is in {owners} splits", d.id);
    }
    assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), docs.len());
}

fn mean_chars(docs: &[&Document]) -> f64 {
    docs.iter().map(|d| d.char_length() as f64).sum::<f64>() / docs.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn systematic_split_is_an_exact_partition(seed in any::<u64>(), n in 0usize..400, low in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, n);
        let policy = if low { SplitPolicy::low_resource(seed) } else { SplitPolicy::english(seed) };
        let a = systematic_split(&docs, &policy).unwrap();
        assert_partition(&docs, &a);

        // Full groups take the ratio exactly; only the tail group rounds.
        let [train, dev, test] = a.counts();
        let r = policy.ratio;
        let g = policy.group_size as f64;
        for (got, want) in [(train, r.train), (dev, r.dev), (test, r.test)] {
            let ideal = want as f64 / g * n as f64;
            prop_assert!((got as f64 - ideal).abs() < 1.0 + 1e-9, "{got} vs {ideal}");
            if n % policy.group_size == 0 {
                prop_assert_eq!(got as f64, ideal);
            }
        }
    }

    #[test]
    fn random_split_is_an_exact_partition(seed in any::<u64>(), n in 0usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, n);
        let a = random_split(&docs, Ratio::EIGHT_ONE_ONE, seed).unwrap();
        assert_partition(&docs, &a);
        prop_assert!((a.counts()[0] as f64 - 0.8 * n as f64).abs() < 1.0);
    }

    #[test]
    fn systematic_split_ignores_input_order(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, n);
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rng);
        let policy = SplitPolicy::english(seed);
        let a = systematic_split(&docs, &policy).unwrap().lookup().into_iter()
            .map(|(k, v)| (k.to_string(), v)).collect::<std::collections::BTreeMap<_, _>>();
        let b = systematic_split(&shuffled, &policy).unwrap().lookup().into_iter()
            .map(|(k, v)| (k.to_string(), v)).collect::<std::collections::BTreeMap<_, _>>();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let docs = random_corpus(&mut rng, 997);
    for method in [Method::Systematic, Method::Random] {
        let policy = SplitPolicy::low_resource(17);
        let first = tsv(&drskit::split::split_with(&docs, &policy, method).unwrap());
        let second = tsv(&drskit::split::split_with(&docs, &policy, method).unwrap());
        assert_eq!(first, second);
    }
}

#[test]
fn systematic_split_balances_lengths() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, 1500);
        let a = systematic_split(&docs, &SplitPolicy::english(seed)).unwrap();
        let means: Vec<f64> = Split::ALL.iter().map(|&s| mean_chars(&a.select(&docs, s))).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                let rel = (means[i] - means[j]).abs() / means[i].max(means[j]);
                assert!(rel < 0.05, "seed {seed}: means {means:?}");
            }
        }
    }
}

#[test]
fn systematic_split_leaks_less_than_random() {
    let (mut systematic, mut random) = (0.0, 0.0);
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = near_duplicate_corpus(&mut rng, 2000, 200);
        for (method, total) in [(Method::Systematic, &mut systematic), (Method::Random, &mut random)] {
            let a = drskit::split::split_with(&docs, &SplitPolicy::english(seed), method).unwrap();
            let report = overlap_report(&a.select(&docs, Split::Train), &a.select(&docs, Split::Test));
            *total += report.mean / 5.0;
        }
    }
    assert!(systematic < random, "systematic {systematic:.4} vs random {random:.4}");
}

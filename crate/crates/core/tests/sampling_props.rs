use molkit::sampling::{count_entropy, count_groups, counts_of, sample, synthetic_labels, weights, SamplingWeights};
use molkit::substruct::FunctionalGroupLabel;
use proptest::prelude::*;

#[test]
fn empirical_frequency_within_three_sigma() {
    let w = SamplingWeights { sigma: vec![2.25, 0.25], p: vec![0.9, 0.1] };
    let n = 100_000;
    let draws = sample(&w, n, 99).unwrap();
    let zeros = draws.iter().filter(|&&i| i == 0).count() as f64;
    let sd = (n as f64 * 0.9 * 0.1).sqrt();
    assert!((zeros - 0.9 * n as f64).abs() <= 3.0 * sd, "{zeros}");
}

#[test]
fn sampling_flattens_group_distribution() {
    let mut flatter = 0;
    for seed in 0..100u64 {
        let labels = synthetic_labels(3000, 20, seed);
        let stats = count_groups(&labels).unwrap();
        let w = weights(&labels, &stats).unwrap();
        let idx = sample(&w, 10_000, seed + 1000).unwrap();
        if count_entropy(&counts_of(&labels, &idx)) > count_entropy(&stats.counts) {
            flatter += 1;
        }
    }
    assert!(flatter >= 99, "{flatter}");
}

fn labels_strategy() -> impl Strategy<Value = Vec<FunctionalGroupLabel>> {
    (1usize..8).prop_flat_map(|g| {
        prop::collection::vec(prop::collection::vec(0u8..=1, g).prop_map(|bits| FunctionalGroupLabel { bits }), 1..30)
    })
}

proptest! {
    #[test]
    fn probabilities_normalize(labels in labels_strategy()) {
        let w = weights(&labels, &count_groups(&labels).unwrap()).unwrap();
        if w.sigma.iter().any(|&s| s > 0.0) {
            prop_assert!((w.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for (s, p) in w.sigma.iter().zip(&w.p) {
            prop_assert!(*p >= 0.0);
            prop_assert_eq!(*s == 0.0, *p == 0.0);
        }
    }

    #[test]
    fn scaling_sigma_leaves_p(labels in labels_strategy(), k in 0.01f64..100.0) {
        let w = weights(&labels, &count_groups(&labels).unwrap()).unwrap();
        let total: f64 = w.sigma.iter().map(|s| s * k).sum();
        if total > 0.0 {
            for (s, p) in w.sigma.iter().zip(&w.p) {
                prop_assert!((s * k / total - p).abs() < 1e-12);
            }
        }
    }
}

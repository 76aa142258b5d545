use approx::assert_abs_diff_eq;
use molkit::dataset::TaskGroup;
use molkit::fingerprint::{tanimoto, Fingerprint};
use molkit::metrics::*;
use molkit::molgraph::random::{random_molecule, random_smiles, RandomMolConfig};
use molkit::molgraph::{canonical_smiles, to_selfies};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toks(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

#[test]
fn exact_examples() {
    assert_eq!(exact("OCC", "CCO"), 1);
    assert_eq!(exact("CCO", "CCN"), 0);
    assert_eq!(exact("C1CC", "CCO"), 0);
    assert_eq!(exact("not a molecule", "CCO"), 0);
    assert_eq!(exact("[C][C][O]", "OCC"), 1);
    assert_eq!(exact("O.CC", "CC.O"), 1);
    assert_eq!(exact("[O-]C(=O)C", "CC([O-])=O"), 1);
    assert_eq!(exact("[NH4+]", "[NH4+]"), 1);
}

#[test]
fn validity_examples() {
    assert_eq!(validity(&["CCO", "c1ccccc1"]), 1.0);
    assert_eq!(validity(&["xx", "C(("]), 0.0);
    assert_eq!(validity(&["CCO", "C(("]), 0.5);
    assert_eq!(validity(&["C(C)(C)(C)(C)C"]), 0.0);
    assert_eq!(validity::<&str>(&[]), 0.0);
}

#[test]
fn fts_examples() {
    for kind in FtsKind::ALL {
        assert_eq!(fts("c1ccccc1O", "Oc1ccccc1", kind), 1.0);
        assert_eq!(fts("garbage", "CCO", kind), 0.0);
        assert_eq!(fts("CCO", "C((", kind), 0.0);
    }
    let a = FtsKind::Morgan.fingerprint(&molkit::molgraph::parse_smiles("C").unwrap());
    let b = FtsKind::Morgan.fingerprint(&molkit::molgraph::parse_smiles("c1ccccc1").unwrap());
    assert_eq!(fts("C", "c1ccccc1", FtsKind::Morgan), tanimoto(&a, &b).unwrap());
    assert!(fts("C", "c1ccccc1", FtsKind::Morgan) < 1.0);
}

#[test]
fn tanimoto_two_of_four() {
    let a = Fingerprint::from_bits(16, &[1, 2, 3]);
    let b = Fingerprint::from_bits(16, &[2, 3, 4]);
    assert_abs_diff_eq!(tanimoto(&a, &b).unwrap(), 0.5, epsilon = 1e-9);
}

#[test]
fn tokenizer() {
    assert_eq!(tokenize("The molecule is a Ring."), vec!["the", "molecule", "is", "a", "ring", "."]);
    assert_eq!(tokenize("2-methyl  (R)"), vec!["2", "-", "methyl", "(", "r", ")"]);
    assert!(tokenize("   ").is_empty());
}

#[test]
fn bleu_examples() {
    assert_eq!(bleu(&toks("a b c d"), &toks("a b c d"), 4), 1.0);
    assert_eq!(bleu(&toks(""), &toks("a b"), 1), 0.0);
    assert_abs_diff_eq!(bleu(&toks("a b c"), &toks("a b d"), 1), 2.0 / 3.0, epsilon = 1e-9);
    assert_abs_diff_eq!(bleu(&toks("a b c"), &toks("a b d"), 2), (2.0f64 / 3.0 * 0.5).sqrt(), epsilon = 1e-9);
    // Short prediction: p1 = 1, BP = exp(1 - 4/2).
    assert_abs_diff_eq!(bleu(&toks("a b"), &toks("a b c d"), 1), (-1.0f64).exp(), epsilon = 1e-9);
    // Clipping: "the" appears once in the reference.
    assert_abs_diff_eq!(bleu(&toks("the the the"), &toks("the cat sat"), 1), 1.0 / 3.0, epsilon = 1e-9);
    assert_eq!(bleu(&toks("a b c"), &toks("d e f"), 1), 0.0);
}

#[test]
fn bleu_is_not_symmetric() {
    let (p, r) = (toks("a b"), toks("a b c d"));
    assert!(bleu(&p, &r, 1) < bleu(&r, &p, 1));
}

#[test]
fn corpus_bleu_pools_counts() {
    let pairs = vec![(toks("a b c"), toks("a b d")), (toks("x y"), toks("x y"))];
    // Unigrams: 4 of 5 match; lengths 5 vs 5.
    assert_abs_diff_eq!(corpus_bleu(&pairs, 1), 0.8, epsilon = 1e-9);
}

#[test]
fn rouge_examples() {
    for v in [RougeVariant::R1, RougeVariant::R2, RougeVariant::Rl] {
        assert_eq!(rouge("a b c", "A B C", v), 1.0);
        assert_eq!(rouge("a b", "c d", v), 0.0);
        assert_eq!(rouge("", "c d", v), 0.0);
    }
    assert_abs_diff_eq!(rouge("a b", "a c", RougeVariant::R1), 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(rouge("a b c d", "a c b d", RougeVariant::Rl), 0.75, epsilon = 1e-9);
    // Bigrams: "a b" matches of 2 in pred and 3 in ref.
    assert_abs_diff_eq!(rouge("a b c", "a b d e", RougeVariant::R2), 2.0 * 0.5 * (1.0 / 3.0) / (0.5 + 1.0 / 3.0), epsilon = 1e-9);
}

#[test]
fn meteor_examples() {
    assert_eq!(meteor_lite(&toks("the cat sat"), &toks("the cat sat")), 1.0);
    assert_eq!(meteor_lite(&toks("a b"), &toks("c d")), 0.0);
    assert_eq!(meteor_lite::<&str>(&[], &toks("c d")), 0.0);
    assert_eq!(stem("running"), "run");
    assert_eq!(meteor_lite(&toks("running"), &toks("run")), 1.0);
    // Three matches in two chunks: penalty 0.5 · (1/3)^3.
    assert_abs_diff_eq!(meteor_lite(&toks("the cat sat"), &toks("sat the cat")), 1.0 - 0.5 / 27.0, epsilon = 1e-9);
    // P = 1/2, R = 1: Fmean = 1/(0.9·2 + 0.1) over the single chunk.
    assert_abs_diff_eq!(meteor_lite(&toks("a b"), &toks("a")), 0.5 / (0.9 * 0.5 + 0.1), epsilon = 1e-9);
}

#[test]
fn regression_examples() {
    let r = regression_metrics(&[Some(1.0), Some(3.0)], &[0.0, 0.0], 0.0).unwrap();
    assert_abs_diff_eq!(r.rmse, 5f64.sqrt(), epsilon = 1e-9);
    assert_abs_diff_eq!(r.mae, 2.0, epsilon = 1e-9);
    assert_eq!(r.invalid_rate, 0.0);
    let r = regression_metrics(&[Some(2.0), Some(-1.0)], &[2.0, -1.0], 0.0).unwrap();
    assert_eq!((r.rmse, r.mae), (0.0, 0.0));
    let r = regression_metrics(&[None, Some(1.0)], &[3.0, 1.0], 1.0).unwrap();
    assert_eq!(r.invalid_rate, 0.5);
    assert_abs_diff_eq!(r.mae, 1.0, epsilon = 1e-12);
    assert_eq!(regression_metrics(&[Some(1.0)], &[1.0, 2.0], 0.0), Err(MetricError::LengthMismatch(1, 2)));
    assert_eq!(regression_metrics(&[], &[], 0.0), Err(MetricError::Empty));
    assert_eq!(parse_number(" -1.5e1 "), Some(-15.0));
    assert_eq!(parse_number("NaN"), None);
    assert_eq!(parse_number("about 3"), None);
}

#[test]
fn roc_auc_examples() {
    assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
    assert_eq!(roc_auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
    assert_abs_diff_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75, epsilon = 1e-9);
    assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), Err(MetricError::SingleClass));
    assert_eq!(roc_auc(&[0.1], &[true, false]), Err(MetricError::LengthMismatch(1, 2)));
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "d", "ring", "rings", "acid", "the"]).prop_map(str::to_string)
}

proptest! {
    #[test]
    fn roc_auc_matches_pairwise_and_monotone(
        data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let auc = roc_auc(&scores, &labels).unwrap();
        prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() < 1e-12);
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert!((roc_auc(&transformed, &labels).unwrap() - auc).abs() < 1e-12);
    }

    #[test]
    fn text_metrics_bounded(
        p in prop::collection::vec(word(), 0..12),
        r in prop::collection::vec(word(), 0..12),
    ) {
        for n in 1..=4 {
            let b = bleu(&p, &r, n);
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert_eq!(b, corpus_bleu(&[(p.clone(), r.clone())], n));
        }
        for v in [RougeVariant::R1, RougeVariant::R2, RougeVariant::Rl] {
            let x = rouge_tokens(&p, &r, v);
            prop_assert!((0.0..=1.0).contains(&x));
            // F1 is symmetric in its arguments.
            prop_assert!((x - rouge_tokens(&r, &p, v)).abs() < 1e-12);
        }
        let m = meteor_lite(&p, &r);
        prop_assert!((0.0..=1.0).contains(&m));
        if !p.is_empty() {
            prop_assert_eq!(meteor_lite(&p, &p), 1.0);
            prop_assert_eq!(bleu(&p, &p, 1), 1.0);
            prop_assert_eq!(rouge_tokens(&p, &p, RougeVariant::Rl), 1.0);
        }
    }

    #[test]
    fn regression_nonnegative(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30)) {
        let preds: Vec<Option<f64>> = v.iter().map(|(p, _)| Some(*p)).collect();
        let refs: Vec<f64> = v.iter().map(|(_, r)| *r).collect();
        let r = regression_metrics(&preds, &refs, 0.0).unwrap();
        prop_assert!(r.rmse >= 0.0 && r.mae >= 0.0);
        prop_assert!(r.mae <= r.rmse + 1e-9);
    }
}

#[test]
fn molecule_identity_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = RandomMolConfig::default();
    for _ in 0..200 {
        let g = random_molecule(&mut rng, &cfg);
        if g.is_empty() {
            continue;
        }
        let a = canonical_smiles(&g);
        let b = random_smiles(&mut rng, &g);
        assert_eq!(exact(&a, &b), 1, "{a} vs {b}");
        let s = to_selfies(&g).unwrap();
        assert_eq!(exact(&s, &a), 1, "{s} vs {a}");
        for kind in FtsKind::ALL {
            assert_eq!(fts(&a, &b, kind), 1.0);
        }
    }
}

#[test]
fn evaluate_groups() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let rep = evaluate(TaskGroup::Molgen, &s(&["OCC", "C(("]), &s(&["CCO", "CCN"]), None).unwrap();
    assert_eq!(rep.exact, Some(0.5));
    assert_eq!(rep.validity, Some(0.5));
    assert_eq!(rep.invalid_rate, 0.5);
    assert_eq!(rep.maccs_fts, Some(0.5));

    let rep = evaluate(TaskGroup::Captioning, &s(&["The ring.", ""]), &s(&["the ring.", "an acid"]), None).unwrap();
    assert_eq!(rep.invalid_rate, 0.5);
    assert_eq!(rep.rouge1, Some(0.5));
    assert!(rep.bleu4.is_some() && rep.meteor.is_some() && rep.rouge_l.is_some());
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json.get("rmse").is_none());

    let rep = evaluate(TaskGroup::PropertyRegression, &s(&["1", "oops"]), &s(&["0", "0"]), Some(3.0)).unwrap();
    assert_abs_diff_eq!(rep.rmse.unwrap(), 5f64.sqrt(), epsilon = 1e-12);
    assert_eq!(rep.invalid_rate, 0.5);
    assert_eq!(
        evaluate(TaskGroup::PropertyRegression, &s(&["oops"]), &s(&["0"]), None),
        Err(MetricError::MissingTrainMean)
    );

    let rep = evaluate(TaskGroup::PropertyClassification, &s(&["0.9", "0.6", "x"]), &s(&["True", "False", "True"]), None).unwrap();
    // The imputed 0.5 ranks below the negative's 0.6.
    assert_eq!(rep.roc_auc, Some(0.5));
    assert_abs_diff_eq!(rep.invalid_rate, 1.0 / 3.0, epsilon = 1e-12);

    assert_eq!(evaluate(TaskGroup::Molgen, &s(&["C"]), &s(&[]), None), Err(MetricError::LengthMismatch(1, 0)));
}

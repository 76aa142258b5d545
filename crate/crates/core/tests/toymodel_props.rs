use molkit::molgraph::random::{random_molecule, random_permutation, RandomMolConfig};
use molkit::molgraph::{parse_smiles, MolGraph};
use molkit::molpo::MolpoConfig;
use molkit::toymodel::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocab(words: &[&str]) -> Vocab {
    Vocab::from_tokens(words.iter().map(|s| s.to_string())).unwrap()
}

fn small_model(seed: u64) -> ToyModel {
    let cfg = ModelConfig { d_g: 8, head_hidden: 6, groups: 5, ..ModelConfig::default() };
    ToyModel::init(cfg, vocab(&["a", "b", "c", "d"]), seed)
}

#[test]
fn shape_examples() {
    let m = ToyModel::init(ModelConfig::default(), vocab(&["x"]), 1);
    let h = m.encode(&parse_smiles("CCO").unwrap()).unwrap().h();
    assert_eq!(h.len(), 10);
    assert!(h.iter().all(|r| r.len() == 32));
    assert_eq!(m.encode(&parse_smiles("C").unwrap()).unwrap().h().len(), 4);
    assert!(matches!(m.encode(&MolGraph::empty()), Err(ModelError::EmptyGraph)));
}

#[test]
fn shape_invariant_on_random_graphs() {
    let m = ToyModel::init(ModelConfig::default(), vocab(&["x"]), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let e = m.encode(&g).unwrap();
        let h = e.h();
        assert_eq!(h.len(), 2 * g.atom_count() + g.bond_count() + 2);
        assert!(h.iter().all(|r| r.len() == 32 && r.iter().all(|v| v.is_finite())));
    }
}

#[test]
fn pooled_embeddings_are_permutation_invariant() {
    let m = ToyModel::init(ModelConfig::default(), vocab(&["x"]), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let perm = random_permutation(&mut rng, g.atom_count());
        let a = m.encode(&g).unwrap();
        let b = m.encode(&g.permute(&perm)).unwrap();
        for (x, y) in a.graph_a.iter().zip(&b.graph_a).chain(a.graph_b.iter().zip(&b.graph_b)) {
            assert!((x - y).abs() < 1e-12);
        }
        for (i, &p) in perm.iter().enumerate() {
            for (x, y) in a.nodes_a[i].iter().zip(&b.nodes_a[p]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn uniform_parameters_give_uniform_tokens() {
    for w in [1usize, 3, 17] {
        let words: Vec<String> = (0..w).map(|i| format!("t{i}")).collect();
        let m = ToyModel::uniform(ModelConfig::default(), Vocab::from_tokens(words).unwrap());
        let input = TokenInput { context: vec![0], target: vec![0, w - 1, 0] };
        let lp = m.score_sequence(&parse_smiles("c1ccccc1O").unwrap(), &input).unwrap();
        for v in lp {
            assert!((v + (w as f64).ln()).abs() < 1e-12, "{v}");
        }
    }
}

#[test]
fn positions_are_normalized() {
    let m = small_model(6);
    let g = parse_smiles("CC(=O)N").unwrap();
    for prefix in [vec![], vec![2], vec![1, 3]] {
        let total: f64 = (0..4)
            .map(|k| {
                let mut target = prefix.clone();
                target.push(k);
                let lp = m.score_sequence(&g, &TokenInput { context: vec![0, 1], target }).unwrap();
                lp.last().unwrap().exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn graph_context_moves_scores() {
    let m = small_model(7);
    let h = m.encode(&parse_smiles("CCN").unwrap()).unwrap().h();
    let input = TokenInput { context: vec![1], target: vec![0, 2] };
    let base = m.score_with_h(&h, &input).unwrap();
    let mut moved = h.clone();
    moved[0][0] += 0.5;
    let other = m.score_with_h(&moved, &input).unwrap();
    assert!(base.iter().zip(&other).any(|(a, b)| (a - b).abs() > 1e-9));
}

#[test]
fn unknown_tokens_are_rejected() {
    let v = vocab(&["a", "b"]);
    assert!(matches!(v.ids(&["a", "zz"]), Err(ModelError::UnknownToken(t)) if t == "zz"));
    assert!(matches!(Vocab::from_tokens((0..600).map(|i| i.to_string())), Err(ModelError::VocabTooLarge(600))));
}

fn random_example<R: Rng>(rng: &mut R) -> PairExample {
    let cfg = RandomMolConfig { min_atoms: 3, max_atoms: 9, ..RandomMolConfig::default() };
    let len = rng.gen_range(1..4);
    PairExample {
        task: "t".into(),
        chosen: random_molecule(rng, &cfg),
        rejected: random_molecule(rng, &cfg),
        context: (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..4)).collect(),
        target: (0..len).map(|_| rng.gen_range(0..4)).collect(),
    }
}

#[test]
fn pair_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 6 {
        let m = small_model(rng.gen());
        let ex = random_example(&mut rng);
        let molpo = MolpoConfig { c: 0.7, beta: 2.0, ..MolpoConfig::default() };
        let objective = PairObjective { molpo, with_molpo: true };
        let gamma = rng.gen_range(0.0..0.3);
        let out = pair_loss(&m, &m.params, &ex, &objective, gamma, None).unwrap();
        // Stay clear of the clip kink, where central differences straddle two branches.
        if ((out.r_w - out.r_l) - molpo.lambda_clip * out.r_w.abs()).abs() < 1e-3 {
            continue;
        }
        let checks = gradient_check(&m.params, 100, 9, |p, g| Ok(pair_loss(&m, p, &ex, &objective, gamma, g)?.loss)).unwrap();
        assert_eq!(checks.len(), m.params.tensors().len());
        for c in checks {
            assert!(c.max_rel_error < 1e-4, "{}: {}", c.name, c.max_rel_error);
        }
        checked += 1;
    }
}

#[test]
fn funcgroup_gradients_match_finite_differences() {
    let m = small_model(10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let labels: Vec<u8> = (0..5).map(|_| rng.gen_range(0..2)).collect();
        let checks = gradient_check(&m.params, 100, 12, |p, gr| funcgroup_loss(&m, p, &g, &labels, gr)).unwrap();
        for c in checks {
            assert!(c.max_rel_error < 1e-4, "{}: {}", c.name, c.max_rel_error);
        }
    }
}

#[test]
fn zero_preference_weight_matches_sft_bitwise() {
    let pairs = synthetic_pairs(&SynthConfig { pairs: 40, seed: 13, ..SynthConfig::default() });
    let vocab = pair_vocab(&pairs, false).unwrap();
    let data = pair_examples(&pairs, &vocab, false).unwrap();
    let mut cfg = TrainConfig { steps: 25, batch_size: 4, seed: 14, use_selfies_tokens: false, ..TrainConfig::default() };
    cfg.molpo.c = 0.0;
    let mut a = ToyModel::init(cfg.model, vocab.clone(), 15);
    let mut b = ToyModel::init(cfg.model, vocab, 15);
    let ta = train_pairs(&mut a, &data, TrainMode::SftOnly, &cfg).unwrap();
    let tb = train_pairs(&mut b, &data, TrainMode::SftPlusMolpo, &cfg).unwrap();
    assert!(a.params.bitwise_eq(&b.params));
    assert_eq!(ta.len(), tb.len());
    for (x, y) in ta.iter().zip(&tb) {
        assert_eq!(x.l_sft.to_bits(), y.l_sft.to_bits());
    }
}

#[test]
fn funcgroup_pretraining_halves_the_loss() {
    let data = synthetic_molecules(200, 16);
    let cfg = TrainConfig { steps: 500, trace_every: 100, seed: 17, ..TrainConfig::default() };
    let mut m = ToyModel::init(cfg.model, vocab(&["x"]), 18);
    let trace = train_funcgroups(&mut m, &data, &cfg).unwrap();
    let (first, last) = (trace[0].1, trace.last().unwrap().1);
    assert!(last <= 0.5 * first, "{first} -> {last}");
}

#[test]
fn non_finite_parameters_abort_training() {
    let pairs = synthetic_pairs(&SynthConfig { pairs: 5, seed: 19, ..SynthConfig::default() });
    let vocab = pair_vocab(&pairs, false).unwrap();
    let data = pair_examples(&pairs, &vocab, false).unwrap();
    let mut m = ToyModel::init(ModelConfig::default(), vocab, 20);
    let id = m.param_id("out_b").unwrap();
    m.params.get_mut(id).data[0] = f64::NAN;
    let cfg = TrainConfig { steps: 3, use_selfies_tokens: false, ..TrainConfig::default() };
    assert!(matches!(train_pairs(&mut m, &data, TrainMode::SftPlusMolpo, &cfg), Err(TrainError::Diverged { step: 0, .. }) | Err(TrainError::Objective(_))));
}

#[test]
fn parameters_round_trip() {
    let m = small_model(21);
    let mut buf = Vec::new();
    m.save(&mut buf).unwrap();
    let back = ToyModel::load(&buf[..]).unwrap();
    assert!(back.params.bitwise_eq(&m.params));
    assert_eq!(back.vocab, m.vocab);
    assert_eq!(back.config, m.config);
    buf[0] ^= 1;
    assert!(matches!(ToyModel::load(&buf[..]), Err(ModelError::Format(_))));
}

#[test]
fn synthetic_pairs_share_target_and_marker() {
    let pairs = synthetic_pairs(&SynthConfig { pairs: 100, seed: 22, ..SynthConfig::default() });
    assert_eq!(pairs.len(), 100);
    for p in &pairs {
        let w = molkit::molgraph::parse_selfies(p.record.input_selfies.as_deref().unwrap()).unwrap();
        let l = molkit::molgraph::parse_selfies(&p.rejected_selfies).unwrap();
        assert_eq!(w.atom_count(), l.atom_count());
        assert_ne!(molkit::molgraph::canonical_smiles(&w), molkit::molgraph::canonical_smiles(&l));
        let has = |g: &MolGraph, sym: &str| g.atoms().iter().any(|a| a.element.symbol() == sym);
        let marker = if p.record.target.ends_with("alpha") { "Br" } else { "Cl" };
        assert!(has(&w, marker) && has(&l, marker));
    }
    let again = synthetic_pairs(&SynthConfig { pairs: 100, seed: 22, ..SynthConfig::default() });
    assert_eq!(pairs, again);
}

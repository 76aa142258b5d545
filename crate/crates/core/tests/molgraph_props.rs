use molkit::molgraph::random::{random_molecule, random_permutation, random_smiles, RandomMolConfig};
use molkit::molgraph::{
    canonical_smiles, canonicalize, murcko_scaffold, parse_selfies, parse_smiles, to_selfies, BondOrder, MolGraph,
    SELFIES_INDEX_ALPHABET,
};
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Labeled = UnGraph<(u8, i8, u8, bool), BondOrder>;

fn to_petgraph(g: &MolGraph) -> Labeled {
    let mut out = Labeled::default();
    let nodes: Vec<_> = g
        .atoms()
        .iter()
        .map(|a| out.add_node((a.element.atomic_number(), a.formal_charge, a.explicit_h, a.aromatic)))
        .collect();
    for b in g.bonds() {
        out.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    out
}

fn isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    is_isomorphic_matching(&to_petgraph(a), &to_petgraph(b), |x, y| x == y, |x, y| x == y)
}

fn molecules(seed: u64, n: usize) -> Vec<MolGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RandomMolConfig::default();
    (0..n).map(|_| random_molecule(&mut rng, &cfg)).collect()
}

#[test]
fn selfies_round_trip_is_isomorphic() {
    for (i, g) in molecules(1, 1000).iter().enumerate() {
        let s = to_selfies(g).unwrap();
        let back = parse_selfies(&s).unwrap();
        assert!(isomorphic(g, &back), "#{i}: {} -> {s} -> {}", canonical_smiles(g), canonical_smiles(&back));
    }
}

#[test]
fn canonical_string_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in molecules(3, 1000) {
        let perm = random_permutation(&mut rng, g.atom_count());
        let p = g.permute(&perm);
        assert!(isomorphic(&g, &p));
        assert_eq!(canonical_smiles(&g), canonical_smiles(&p));
    }
}

#[test]
fn canonical_string_reparses_to_itself() {
    for g in molecules(4, 500) {
        let c = canonical_smiles(&g);
        let back = parse_smiles(&c).unwrap_or_else(|e| panic!("{c}: {e}"));
        assert!(isomorphic(&g, &back), "{c}");
        assert_eq!(canonical_smiles(&back), c);
    }
}

#[test]
fn canonical_equality_agrees_with_vf2() {
    // Pairs mix identical molecules under random spelling with unrelated ones
    // and near misses sharing the atom count.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = molecules(6, 1000);
    let mut same = 0;
    for i in 0..1000 {
        let a = &pool[i];
        let b = match i % 3 {
            0 => parse_smiles(&random_smiles(&mut rng, a)).unwrap(),
            1 => pool[(i * 7 + 1) % pool.len()].clone(),
            _ => pool.iter().find(|m| m.atom_count() == a.atom_count() && *m != a).cloned().unwrap_or_else(|| a.clone()),
        };
        let by_canon = canonical_smiles(a) == canonical_smiles(&b);
        assert_eq!(by_canon, isomorphic(a, &b), "{} vs {}", canonical_smiles(a), canonical_smiles(&b));
        same += by_canon as usize;
    }
    assert!(same >= 333);
}

#[test]
fn canonical_ranks_are_permutations() {
    for g in molecules(7, 100) {
        let mut r = canonicalize(&g).ranks;
        r.sort_unstable();
        assert_eq!(r, (0..g.atom_count()).collect::<Vec<_>>());
    }
}

#[test]
fn scaffolds_are_valid_and_ringed() {
    for g in molecules(8, 300) {
        let s = murcko_scaffold(&g);
        s.validate().unwrap();
        if g.ring_bonds().iter().any(|r| *r) {
            assert!(!s.is_empty());
            assert!(s.ring_bonds().iter().any(|r| *r));
        } else {
            assert!(s.is_empty());
        }
        assert_eq!(canonical_smiles(&murcko_scaffold(&s)), canonical_smiles(&s));
    }
}

#[test]
fn selfies_examples() {
    let ethanol = parse_selfies("[C][C][O]").unwrap();
    assert!(isomorphic(&ethanol, &parse_smiles("CCO").unwrap()));
    // [Branch1] reads one index token ([C] = 0), so the branch body is the
    // single next token: a fluorine on the first carbon.
    let g = parse_selfies("[C][Branch1][C][F]").unwrap();
    assert!(isomorphic(&g, &parse_smiles("CF").unwrap()));
    assert_eq!(SELFIES_INDEX_ALPHABET[0], "[C]");
}

const VOCAB: &[&str] = &[
    "[C]", "[=C]", "[#C]", "[N]", "[=N]", "[#N]", "[O]", "[=O]", "[S]", "[=S]", "[P]", "[F]", "[Cl]", "[Br]", "[I]",
    "[B]", "[NH1+1]", "[O-1]", "[CH0]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]", "[Ring1]",
    "[=Ring1]", "[#Ring1]", "[Ring2]", ".",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn any_token_string_decodes(tokens in prop::collection::vec(prop::sample::select(VOCAB), 0..40)) {
        let text = tokens.concat();
        let g = parse_selfies(&text).unwrap();
        g.validate().unwrap();
        let again = parse_selfies(&to_selfies(&g).unwrap()).unwrap();
        prop_assert_eq!(canonical_smiles(&again), canonical_smiles(&g));
    }

    #[test]
    fn parsed_graphs_respect_valence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let smiles = random_smiles(&mut rng, &g);
        let parsed = parse_smiles(&smiles).unwrap();
        parsed.validate().unwrap();
        for (i, atom) in parsed.kekulize().unwrap().atoms().iter().enumerate() {
            let used: u32 = parsed.kekulize().unwrap().neighbors(i).iter()
                .map(|&(_, b)| parsed.kekulize().unwrap().bonds()[b].order.base_valence() as u32)
                .sum::<u32>() + atom.explicit_h as u32;
            if let Some(max) = atom.element.max_valence(atom.formal_charge) {
                prop_assert!(used <= max as u32);
            }
        }
    }
}

use molkit::fingerprint::{morgan, path_fp, tanimoto, Fingerprint, FingerprintError};
use molkit::molgraph::parse_smiles;
use molkit::molgraph::random::{random_molecule, random_permutation, RandomMolConfig};
use molkit::substruct::{functional_group_table, functional_groups, maccs_keys, maccs_table};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fp(width: usize, bits: Vec<usize>) -> Fingerprint {
    Fingerprint::from_bits(width, &bits)
}

#[test]
fn tanimoto_hand_examples() {
    assert_eq!(tanimoto(&fp(8, vec![1, 2, 3]), &fp(8, vec![2, 3, 4])).unwrap(), 0.5);
    assert_eq!(tanimoto(&fp(8, vec![]), &fp(8, vec![])).unwrap(), 1.0);
    assert_eq!(tanimoto(&fp(8, vec![0]), &fp(8, vec![7])).unwrap(), 0.0);
    assert_eq!(tanimoto(&fp(8, vec![]), &fp(16, vec![])), Err(FingerprintError::WidthMismatch(8, 16)));
}

#[test]
fn methane_and_benzene_share_nothing() {
    let a = morgan(&parse_smiles("C").unwrap(), 2, 2048);
    let b = morgan(&parse_smiles("c1ccccc1").unwrap(), 2, 2048);
    assert_eq!(a.count_ones(), 3);
    assert_eq!(tanimoto(&a, &b).unwrap(), 0.0);
}

#[test]
fn hex_round_trip() {
    let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
    let f = morgan(&g, 2, 2048);
    assert_eq!(f.to_hex().parse::<Fingerprint>().unwrap(), f);
    assert!("2048:zz".parse::<Fingerprint>().is_err());
    assert!("9:ffff".parse::<Fingerprint>().is_err());
}

#[test]
fn tables_have_versions() {
    assert!(!maccs_table().version().is_empty());
    assert!(!functional_group_table().version().is_empty());
    assert_eq!(functional_groups(&parse_smiles("CCO").unwrap()).bits.len(), functional_group_table().width());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tanimoto_is_symmetric_and_bounded(
        a in prop::collection::vec(0usize..64, 0..20),
        b in prop::collection::vec(0usize..64, 0..20),
    ) {
        let (x, y) = (fp(64, a), fp(64, b));
        let s = tanimoto(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, tanimoto(&y, &x).unwrap());
        prop_assert_eq!(tanimoto(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn fingerprints_ignore_atom_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let p = g.permute(&random_permutation(&mut rng, g.atom_count()));
        prop_assert_eq!(morgan(&g, 2, 1024), morgan(&p, 2, 1024));
        prop_assert_eq!(path_fp(&g, 1, 7, 1024).unwrap(), path_fp(&p, 1, 7, 1024).unwrap());
        prop_assert_eq!(maccs_keys(&g, maccs_table()).fingerprint, maccs_keys(&p, maccs_table()).fingerprint);
        prop_assert_eq!(functional_groups(&g), functional_groups(&p));
    }

    #[test]
    fn larger_radius_sets_a_superset(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_molecule(&mut rng, &RandomMolConfig::default());
        let (r1, r2) = (morgan(&g, 1, 4096), morgan(&g, 2, 4096));
        prop_assert!(r1.ones().iter().all(|&b| r2.get(b)));
    }
}

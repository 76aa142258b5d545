use super::{BondOrder, MolGraph};

/// Bemis–Murcko scaffold: ring systems plus the linkers between them.
///
/// Terminal atoms are pruned until none remain; atoms double-bonded to the
/// remaining core are then restored, as RDKit does. Acyclic molecules give
/// an empty graph. Cut bonds become hydrogens on the surviving atom.
pub fn murcko_scaffold(g: &MolGraph) -> MolGraph {
    let n = g.atom_count();
    let mut keep = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&i| degree[i] <= 1).collect();
    while let Some(v) = queue.pop() {
        if !keep[v] {
            continue;
        }
        keep[v] = false;
        for &(u, _) in g.neighbors(v) {
            if keep[u] {
                degree[u] -= 1;
                if degree[u] <= 1 {
                    queue.push(u);
                }
            }
        }
    }
    if !keep.iter().any(|&k| k) {
        return MolGraph::empty();
    }
    let core = keep.clone();
    for bond in g.bonds() {
        if bond.order != BondOrder::Double {
            continue;
        }
        for (x, y) in [(bond.a, bond.b), (bond.b, bond.a)] {
            if !core[x] && core[y] && g.degree(x) == 1 {
                keep[x] = true;
            }
        }
    }
    let remove: Vec<bool> = keep.iter().map(|k| !k).collect();
    g.without_atoms(&remove).expect("scaffold of a valid graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonical_smiles, parse_smiles};

    fn scaffold(s: &str) -> String {
        canonical_smiles(&murcko_scaffold(&parse_smiles(s).unwrap()))
    }

    #[test]
    fn cases() {
        assert_eq!(scaffold("CCc1ccccc1"), "c1ccccc1");
        assert!(murcko_scaffold(&parse_smiles("CCCCCC").unwrap()).is_empty());
        assert_eq!(scaffold("c1ccccc1"), "c1ccccc1");
        assert_eq!(scaffold("c1ccccc1CCc1ccncc1"), scaffold("n1ccc(cc1)CCc1ccccc1"));
        assert_eq!(scaffold("CC1CCC(=O)CC1"), canonical_smiles(&parse_smiles("O=C1CCCCC1").unwrap()));
        assert_eq!(scaffold("CCO.c1ccccc1C"), "c1ccccc1");
    }
}

//! Canonical atom ranking and canonical SMILES.
//!
//! Ranks come from iterated neighbourhood refinement. Remaining ties are
//! broken by an individualization search that keeps the lexicographically
//! smallest SMILES over all leaves; automorphisms found along the way prune
//! equivalent branches.

use super::smiles::fragment_smiles;
use super::MolGraph;

/// Leaf budget for the tie-breaking search. Only highly symmetric
/// cage-like structures come near it.
const LEAF_BUDGET: usize = 2000;
const MAX_AUTOMORPHISMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    /// `ranks[i]` is the position of atom `i` in the canonical atom order.
    pub ranks: Vec<usize>,
    pub canonical_string: String,
}

pub fn canonical_smiles(g: &MolGraph) -> String {
    canonicalize(g).canonical_string
}

pub fn canonicalize(g: &MolGraph) -> CanonicalForm {
    let n = g.atom_count();
    if n == 0 {
        return CanonicalForm { ranks: Vec::new(), canonical_string: String::new() };
    }
    let ring = g.ring_atoms();
    let initial: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let a = g.atom(i);
            let mut orders: Vec<i64> = g.neighbors(i).iter().map(|&(_, bi)| g.bonds()[bi].order.code() as i64).collect();
            orders.sort_unstable();
            // Degree first so that traversal starts from a terminal atom.
            let mut key = vec![
                g.degree(i) as i64,
                a.element.atomic_number() as i64,
                a.formal_charge as i64,
                a.explicit_h as i64,
                a.aromatic as i64,
                ring[i] as i64,
            ];
            key.extend(orders);
            key
        })
        .collect();
    let classes = refine(g, dense_ranks(&initial));
    let mut search = Search { g, best: None, automorphisms: Vec::new(), leaves: 0 };
    search.descend(classes, &mut Vec::new());
    let (text, order) = search.best.expect("at least one leaf");
    let mut ranks = vec![0; n];
    for (pos, &atom) in order.iter().enumerate() {
        ranks[atom] = pos;
    }
    CanonicalForm { ranks, canonical_string: text }
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(k).expect("key present")).collect()
}

fn class_count(classes: &[usize]) -> usize {
    classes.iter().max().map_or(0, |m| m + 1)
}

/// Refines until the number of classes stops growing. Class ids stay
/// ordered consistently with the input classes.
fn refine(g: &MolGraph, mut classes: Vec<usize>) -> Vec<usize> {
    let mut count = class_count(&classes);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> =
                    g.neighbors(i).iter().map(|&(u, bi)| (classes[u], g.bonds()[bi].order.code())).collect();
                nb.sort_unstable();
                (classes[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_count = class_count(&next);
        if next_count == count {
            return classes;
        }
        classes = next;
        count = next_count;
    }
}

struct Search<'a> {
    g: &'a MolGraph,
    best: Option<(String, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
    leaves: usize,
}

impl<'a> Search<'a> {
    fn descend(&mut self, classes: Vec<usize>, prefix: &mut Vec<usize>) {
        let n = classes.len();
        if class_count(&classes) == n {
            self.leaf(&classes);
            return;
        }
        // Smallest class id with more than one member.
        let mut sizes = vec![0usize; n];
        for &c in &classes {
            sizes[c] += 1;
        }
        let target = (0..n).find(|&c| sizes[c] > 1).expect("non-discrete partition has a tied class");
        let cell: Vec<usize> = (0..n).filter(|&i| classes[i] == target).collect();
        let mut explored: Vec<usize> = Vec::new();
        for &v in &cell {
            if self.leaves >= LEAF_BUDGET {
                return;
            }
            if !explored.is_empty() && self.equivalent_to_explored(v, &explored, prefix) {
                continue;
            }
            explored.push(v);
            let split: Vec<usize> = classes.iter().enumerate().map(|(i, &c)| 2 * c + usize::from(i != v)).collect();
            let next = refine(self.g, dense_ranks(&split));
            prefix.push(v);
            self.descend(next, prefix);
            prefix.pop();
        }
    }

    /// Whether `v` lies in the orbit of an explored atom under the known
    /// automorphisms that fix every atom in `prefix`.
    fn equivalent_to_explored(&self, v: usize, explored: &[usize], prefix: &[usize]) -> bool {
        let n = self.g.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for (i, &j) in gamma.iter().enumerate() {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        if !any {
            return false;
        }
        let root = find(&mut parent, v);
        explored.iter().any(|&e| find(&mut parent, e) == root)
    }

    fn leaf(&mut self, ranks: &[usize]) {
        self.leaves += 1;
        let mut pieces = fragment_smiles(self.g, ranks);
        pieces.sort_by(|a, b| a.text.cmp(&b.text).then(a.root_rank.cmp(&b.root_rank)));
        let text = pieces.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(".");
        let order: Vec<usize> = pieces.iter().flat_map(|p| p.order.iter().copied()).collect();
        match &self.best {
            None => self.best = Some((text, order)),
            Some((best_text, best_order)) => {
                if text < *best_text {
                    self.best = Some((text, order));
                } else if text == *best_text && self.automorphisms.len() < MAX_AUTOMORPHISMS {
                    let mut gamma = vec![0; order.len()];
                    for (k, &a) in best_order.iter().enumerate() {
                        gamma[a] = order[k];
                    }
                    if gamma.iter().enumerate().any(|(i, &j)| i != j) {
                        self.automorphisms.push(gamma);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn canon(s: &str) -> String {
        canonical_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn spelling_variants_agree() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C1=CC=CC=C1"), canon("c1ccccc1"));
        assert_eq!(canon("c1ccccc1O"), canon("Oc1ccccc1"));
        assert_eq!(canon("CC(C)(C)C"), canon("C(C)(C)(C)C"));
        assert_ne!(canon("CCO"), canon("CCN"));
        assert_eq!(canon("O.CC"), canon("CC.O"));
    }

    #[test]
    fn known_outputs() {
        assert_eq!(canon("C"), "C");
        assert_eq!(canon("OCC"), "CCO");
        assert_eq!(canon("C1=CC=CC=C1"), "c1ccccc1");
        assert_eq!(canonical_smiles(&MolGraph::empty()), "");
    }

    #[test]
    fn ranks_form_a_permutation() {
        let form = canonicalize(&parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap());
        let mut r = form.ranks.clone();
        r.sort();
        assert_eq!(r, (0..form.ranks.len()).collect::<Vec<_>>());
    }

    #[test]
    fn symmetric_cages_stay_within_budget() {
        // cubane and adamantane
        for s in ["C12C3C4C1C5C2C3C45", "C1C2CC3CC1CC(C2)C3"] {
            let g = parse_smiles(s).unwrap();
            let a = canonical_smiles(&g);
            let perm: Vec<usize> = (0..g.atom_count()).rev().collect();
            assert_eq!(a, canonical_smiles(&g.permute(&perm)));
        }
    }
}

//! Molecular graphs: SMILES/SELFIES parsing, valence model, aromaticity,
//! canonical ranking and Murcko scaffolds.
//!
//! A [`MolGraph`] stores heavy atoms only. Hydrogens are folded into each
//! atom's `explicit_h` count, which always holds the resolved total. Aromatic
//! atoms and bonds are the result of perception on a Kekulé structure, so two
//! inputs that describe the same molecule (Kekulé or lowercase aromatic SMILES,
//! SELFIES) produce identical graphs up to atom order.

mod aromatic;
mod canon;
mod element;
pub mod random;
mod scaffold;
mod selfies;
mod smiles;

use serde::{Deserialize, Serialize};

pub use canon::{canonicalize, canonical_smiles, CanonicalForm};
pub use element::Element;
pub use scaffold::murcko_scaffold;
pub use selfies::{parse_selfies, selfies_tokens, to_selfies, SELFIES_INDEX_ALPHABET};
pub use smiles::{parse_smiles, write_smiles};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MolError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unclosed ring bond {label} opened at position {position}")]
    UnclosedRing { label: u32, position: usize },
    #[error("valence violation on atom {atom} ({element})")]
    Valence { atom: usize, element: String },
    #[error("aromatic system cannot be kekulized")]
    Kekulize,
    #[error("unknown SELFIES token `{0}`")]
    UnknownToken(String),
    #[error("element {0} is outside the supported vocabulary")]
    UnsupportedElement(String),
    #[error("invalid graph: {0}")]
    Structure(String),
    #[error("empty input")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's bond-order sum, counting aromatic as 1.
    pub fn base_valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn from_valence(order: u8) -> Option<BondOrder> {
        match order {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    /// Small stable integer code used by invariants and hashing.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Total hydrogen count after valence resolution.
    pub explicit_h: u8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom { element, formal_charge: 0, explicit_h: 0, aromatic: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    /// Builds a graph from resolved atoms and bonds, checking structure and
    /// valence.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph, MolError> {
        let g = MolGraph::from_parts(atoms, bonds)?;
        g.validate()?;
        Ok(g)
    }

    /// Structural checks only: endpoints in range, no self loops, no
    /// duplicate bonds.
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph, MolError> {
        let mut adj = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(MolError::Structure(format!("bond {i} endpoint out of range")));
            }
            if bond.a == bond.b {
                return Err(MolError::Structure(format!("bond {i} is a self loop")));
            }
            if adj[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(MolError::Structure(format!(
                    "duplicate bond between {} and {}",
                    bond.a, bond.b
                )));
            }
            adj[bond.a].push((bond.b, i));
            adj[bond.b].push((bond.a, i));
        }
        Ok(MolGraph { atoms, bonds, adj })
    }

    pub fn empty() -> MolGraph {
        MolGraph::default()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    /// `(neighbour, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|&&(n, _)| n == b).map(|&(_, bi)| bi)
    }

    pub fn has_aromatic(&self) -> bool {
        self.bonds.iter().any(|b| b.order == BondOrder::Aromatic)
    }

    /// Bond-order sum of atom `i`, aromatic bonds counted as 1.
    pub(crate) fn base_bond_sum(&self, i: usize) -> u8 {
        self.adj[i].iter().map(|&(_, bi)| self.bonds[bi].order.base_valence()).sum()
    }

    /// Marks bonds that lie on at least one cycle (i.e. are not bridges).
    pub fn ring_bonds(&self) -> Vec<bool> {
        ring_bond_mask(self.atoms.len(), &self.bonds, &self.adj)
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (bond, _) in self.bonds.iter().zip(&ring).filter(|(_, r)| **r) {
            out[bond.a] = true;
            out[bond.b] = true;
        }
        out
    }

    /// Connected components as sorted atom index lists, ordered by their
    /// smallest atom index.
    pub fn fragments(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &(n, _) in &self.adj[v] {
                    if !seen[n] {
                        seen[n] = true;
                        comp.push(n);
                        stack.push(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// A copy with aromatic bonds replaced by an alternating single/double
    /// assignment. Atom aromatic flags are cleared.
    pub fn kekulize(&self) -> Result<MolGraph, MolError> {
        if !self.has_aromatic() && !self.atoms.iter().any(|a| a.aromatic) {
            return Ok(self.clone());
        }
        let need: Vec<bool> = (0..self.atoms.len())
            .map(|i| self.atoms[i].aromatic && aromatic::needs_pi_known_h(self, i))
            .collect();
        let doubles = aromatic::match_pi_bonds(&self.bonds, &need).ok_or(MolError::Kekulize)?;
        let mut bonds = self.bonds.clone();
        for (i, bond) in bonds.iter_mut().enumerate() {
            if bond.order == BondOrder::Aromatic {
                bond.order = if doubles[i] { BondOrder::Double } else { BondOrder::Single };
            }
        }
        let atoms = self.atoms.iter().map(|a| Atom { aromatic: false, ..*a }).collect();
        MolGraph::from_parts(atoms, bonds)
    }

    /// Checks every atom against the valence table after kekulization.
    pub fn validate(&self) -> Result<(), MolError> {
        let kek = self.kekulize()?;
        for i in 0..kek.atoms.len() {
            let atom = kek.atoms[i];
            let used = kek.base_bond_sum(i) as u32 + atom.explicit_h as u32;
            if let Some(max) = atom.element.max_valence(atom.formal_charge) {
                if used > max as u32 {
                    return Err(MolError::Valence { atom: i, element: atom.element.to_string() });
                }
            }
        }
        Ok(())
    }

    /// Relabels atoms: atom `i` moves to position `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond { a: perm[b.a], b: perm[b.b], order: b.order })
            .collect();
        MolGraph::from_parts(atoms, bonds).expect("permutation preserves structure")
    }

    /// Deletes the flagged atoms. Bonds to deleted atoms are replaced by
    /// hydrogens on the surviving endpoint and aromaticity is re-perceived.
    pub fn without_atoms(&self, remove: &[bool]) -> Result<MolGraph, MolError> {
        let kek = self.kekulize()?;
        let mut map = vec![usize::MAX; kek.atoms.len()];
        let mut atoms = Vec::new();
        for (i, atom) in kek.atoms.iter().enumerate() {
            if !remove[i] {
                map[i] = atoms.len();
                atoms.push(*atom);
            }
        }
        let mut bonds = Vec::new();
        for bond in &kek.bonds {
            match (remove[bond.a], remove[bond.b]) {
                (false, false) => bonds.push(Bond { a: map[bond.a], b: map[bond.b], order: bond.order }),
                (false, true) => atoms[map[bond.a]].explicit_h += bond.order.base_valence(),
                (true, false) => atoms[map[bond.b]].explicit_h += bond.order.base_valence(),
                (true, true) => {}
            }
        }
        MolGraph::from_kekule(atoms, bonds)
    }

    /// Builds a graph from a Kekulé structure with resolved hydrogens and
    /// runs aromaticity perception.
    pub fn from_kekule(mut atoms: Vec<Atom>, mut bonds: Vec<Bond>) -> Result<MolGraph, MolError> {
        if bonds.iter().any(|b| b.order == BondOrder::Aromatic) {
            return Err(MolError::Structure("kekulé input contains aromatic bonds".into()));
        }
        for a in atoms.iter_mut() {
            a.aromatic = false;
        }
        let probe = MolGraph::from_parts(atoms.clone(), bonds.clone())?;
        aromatic::perceive(&probe, &mut atoms, &mut bonds);
        MolGraph::new(atoms, bonds)
    }

    /// Appends `other` as additional fragment(s); returns the index offset of
    /// its atoms.
    pub fn disjoint_union(&self, other: &MolGraph) -> MolGraph {
        let offset = self.atoms.len();
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut bonds = self.bonds.clone();
        bonds.extend(other.bonds.iter().map(|b| Bond { a: b.a + offset, b: b.b + offset, order: b.order }));
        MolGraph::from_parts(atoms, bonds).expect("union of valid graphs")
    }

    /// The sub-graph induced by one fragment's atoms.
    pub fn induced(&self, keep: &[usize]) -> MolGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i]).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond { a: map[b.a], b: map[b.b], order: b.order })
            .collect();
        MolGraph::from_parts(atoms, bonds).expect("induced subgraph of valid graph")
    }
}

pub(crate) fn ring_bond_mask(n: usize, bonds: &[Bond], adj: &[Vec<(usize, usize)>]) -> Vec<bool> {
    // Iterative Tarjan bridge finding.
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent bond, next neighbour cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(v, pbond, cursor)) = stack.last() {
            if cursor < adj[v].len() {
                let (u, bi) = adj[v][cursor];
                stack.last_mut().expect("non-empty").2 += 1;
                if bi == pbond {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, bi, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[pbond] = true;
                    }
                }
            }
        }
    }
    is_bridge.into_iter().map(|b| !b).collect()
}

/// An atom whose hydrogen count may still be unresolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingAtom {
    pub element: Element,
    pub formal_charge: i8,
    /// `None` means implicit: filled to the lowest allowed valence.
    pub hydrogens: Option<u8>,
    pub aromatic: bool,
}

/// Incremental construction of a [`MolGraph`] from parsed or generated
/// atoms. `build` kekulizes lowercase aromatic input, resolves implicit
/// hydrogens, checks valence and perceives aromaticity.
#[derive(Debug, Clone, Default)]
pub struct MolBuilder {
    atoms: Vec<PendingAtom>,
    bonds: Vec<Bond>,
}

impl MolBuilder {
    pub fn new() -> MolBuilder {
        MolBuilder::default()
    }

    pub fn add_atom(&mut self, atom: PendingAtom) -> usize {
        self.atoms.push(atom);
        self.atoms.len() - 1
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn has_bond(&self, a: usize, b: usize) -> bool {
        self.bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), MolError> {
        if a == b || a >= self.atoms.len() || b >= self.atoms.len() {
            return Err(MolError::Structure(format!("invalid bond {a}-{b}")));
        }
        if self.has_bond(a, b) {
            return Err(MolError::Structure(format!("duplicate bond between {a} and {b}")));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    pub fn build(self) -> Result<MolGraph, MolError> {
        let n = self.atoms.len();
        let mut bonds = self.bonds;
        if bonds.iter().any(|b| b.order == BondOrder::Aromatic) || self.atoms.iter().any(|a| a.aromatic) {
            let mut sums = vec![0u8; n];
            for b in &bonds {
                sums[b.a] += b.order.base_valence();
                sums[b.b] += b.order.base_valence();
            }
            let need: Vec<bool> = self
                .atoms
                .iter()
                .enumerate()
                .map(|(i, a)| a.aromatic && aromatic::needs_pi_pending(a, sums[i]))
                .collect();
            let doubles = aromatic::match_pi_bonds(&bonds, &need).ok_or(MolError::Kekulize)?;
            for (i, bond) in bonds.iter_mut().enumerate() {
                if bond.order == BondOrder::Aromatic {
                    bond.order = if doubles[i] { BondOrder::Double } else { BondOrder::Single };
                }
            }
        }
        let mut sums = vec![0u8; n];
        for b in &bonds {
            sums[b.a] += b.order.base_valence();
            sums[b.b] += b.order.base_valence();
        }
        let mut atoms = Vec::with_capacity(n);
        for (i, p) in self.atoms.iter().enumerate() {
            let valence_err = || MolError::Valence { atom: i, element: p.element.to_string() };
            let h = match p.hydrogens {
                Some(h) => {
                    if let Some(max) = p.element.max_valence(p.formal_charge) {
                        if sums[i] as u32 + h as u32 > max as u32 {
                            return Err(valence_err());
                        }
                    }
                    h
                }
                None => match p.element.valences(p.formal_charge) {
                    None => 0,
                    Some(_) => {
                        let target =
                            p.element.target_valence(p.formal_charge, sums[i]).ok_or_else(valence_err)?;
                        target - sums[i]
                    }
                },
            };
            atoms.push(Atom { element: p.element, formal_charge: p.formal_charge, explicit_h: h, aromatic: false });
        }
        MolGraph::from_kekule(atoms, bonds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridges_are_not_ring_bonds() {
        let g = parse_smiles("CC1CC1C").unwrap();
        let ring = g.ring_bonds();
        assert_eq!(ring.iter().filter(|r| **r).count(), 3);
    }

    #[test]
    fn removing_atoms_restores_hydrogens() {
        let g = parse_smiles("CCO").unwrap();
        let o = g.atoms().iter().position(|a| a.element == Element::O).unwrap();
        let mut remove = vec![false; 3];
        remove[o] = true;
        let h = g.without_atoms(&remove).unwrap();
        assert_eq!(canonical_smiles(&h), "CC");
        assert!(h.atoms().iter().all(|a| a.explicit_h == 3));
    }

    #[test]
    fn removal_from_aromatic_ring_breaks_aromaticity() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let mut remove = vec![false; 6];
        remove[0] = true;
        let h = g.without_atoms(&remove).unwrap();
        assert!(!h.has_aromatic());
        h.validate().unwrap();
    }

    #[test]
    fn structure_errors() {
        let a = Atom { explicit_h: 4, ..Atom::new(Element::C) };
        assert!(MolGraph::new(vec![a], vec![Bond { a: 0, b: 1, order: BondOrder::Single }]).is_err());
        assert!(MolGraph::new(vec![a, a], vec![Bond { a: 0, b: 0, order: BondOrder::Single }]).is_err());
        let c = Atom { explicit_h: 3, ..Atom::new(Element::C) };
        let dup = vec![
            Bond { a: 0, b: 1, order: BondOrder::Single },
            Bond { a: 1, b: 0, order: BondOrder::Single },
        ];
        assert!(MolGraph::new(vec![c, c], dup).is_err());
        let over = Atom { explicit_h: 5, ..Atom::new(Element::C) };
        assert!(matches!(MolGraph::new(vec![over], vec![]), Err(MolError::Valence { .. })));
    }

    #[test]
    fn fragments_are_reported_separately() {
        let g = parse_smiles("CC.O.N").unwrap();
        assert_eq!(g.fragments().len(), 3);
    }
}

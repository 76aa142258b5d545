//! Hückel aromaticity perception on Kekulé structures and the inverse
//! kekulization by perfect matching.

use super::{Atom, Bond, BondOrder, Element, MolGraph, PendingAtom};

const MAX_RING_SIZE: usize = 8;
const MAX_CYCLES: usize = 50_000;
const MATCH_BUDGET: usize = 200_000;

/// Whether an aromatic atom with known hydrogens needs a double bond in the
/// Kekulé form: its current valence is not allowed but one more would be.
pub(super) fn needs_pi_known_h(g: &MolGraph, i: usize) -> bool {
    let atom = g.atom(i);
    let used = g.base_bond_sum(i) + atom.explicit_h;
    needs_pi(atom.element, atom.formal_charge, used)
}

fn needs_pi(element: Element, charge: i8, used: u8) -> bool {
    match element.valences(charge) {
        Some(v) => !v.contains(&used) && v.contains(&(used + 1)),
        None => false,
    }
}

/// Same decision for parsed atoms. Lowercase organic atoms carry no
/// hydrogen count; carbon then takes a double bond whenever it has room.
pub(super) fn needs_pi_pending(atom: &PendingAtom, bond_sum: u8) -> bool {
    match atom.hydrogens {
        Some(h) => needs_pi(atom.element, atom.formal_charge, bond_sum + h),
        None if atom.element == Element::C && atom.formal_charge == 0 => bond_sum <= 3,
        None => needs_pi(atom.element, atom.formal_charge, bond_sum),
    }
}

/// Chooses aromatic bonds to become double so that every flagged atom gets
/// exactly one. Returns a per-bond mask, or `None` if no perfect matching
/// exists.
pub(super) fn match_pi_bonds(bonds: &[Bond], need: &[bool]) -> Option<Vec<bool>> {
    let n = need.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, b) in bonds.iter().enumerate() {
        if b.order == BondOrder::Aromatic && need[b.a] && need[b.b] {
            adj[b.a].push((b.b, i));
            adj[b.b].push((b.a, i));
        }
    }
    let mut partner = vec![usize::MAX; n];
    let mut chosen = vec![false; bonds.len()];
    let mut budget = MATCH_BUDGET;
    if solve(need, &adj, &mut partner, &mut chosen, &mut budget) {
        Some(chosen)
    } else {
        None
    }
}

fn solve(
    need: &[bool],
    adj: &[Vec<(usize, usize)>],
    partner: &mut [usize],
    chosen: &mut [bool],
    budget: &mut usize,
) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    // Most constrained unmatched atom first.
    let mut best: Option<(usize, usize)> = None;
    for v in 0..need.len() {
        if !need[v] || partner[v] != usize::MAX {
            continue;
        }
        let free = adj[v].iter().filter(|&&(u, _)| partner[u] == usize::MAX).count();
        if best.is_none_or(|(_, f)| free < f) {
            best = Some((v, free));
            if free <= 1 {
                break;
            }
        }
    }
    let Some((v, free)) = best else { return true };
    if free == 0 {
        return false;
    }
    for &(u, bi) in &adj[v] {
        if partner[u] != usize::MAX {
            continue;
        }
        partner[v] = u;
        partner[u] = v;
        chosen[bi] = true;
        if solve(need, adj, partner, chosen, budget) {
            return true;
        }
        partner[v] = usize::MAX;
        partner[u] = usize::MAX;
        chosen[bi] = false;
    }
    false
}

/// π-electron contribution of an atom to a ring it belongs to, or `None`
/// if the atom cannot be part of an aromatic ring.
fn pi_electrons(g: &MolGraph, ring: &[bool], i: usize) -> Option<u8> {
    let atom = g.atom(i);
    atom.element.valences(atom.formal_charge)?;
    let mut ring_double = 0;
    let mut exo_double = 0;
    for &(_, bi) in g.neighbors(i) {
        match g.bonds()[bi].order {
            BondOrder::Triple => return None,
            BondOrder::Double if ring[bi] => ring_double += 1,
            BondOrder::Double => exo_double += 1,
            _ => {}
        }
    }
    let used = g.base_bond_sum(i) + atom.explicit_h;
    let allowed = atom.element.valences(atom.formal_charge)?;
    // Perception must be undone by kekulization, which only sees the
    // aromatic valence state.
    match (ring_double, exo_double) {
        (1, 0) => return needs_pi(atom.element, atom.formal_charge, used - 1).then_some(1),
        (0, 0) => {}
        (0, _) if atom.element == Element::C => return allowed.contains(&used).then_some(0),
        _ => return None,
    }
    let z = atom.element.atomic_number();
    match (z, atom.formal_charge, used) {
        (7 | 15 | 33, 0, 3) => Some(2),
        (8 | 16 | 34, 0, 2) => Some(2),
        (6, -1, 3) => Some(2),
        (7, -1, 2) => Some(2),
        (6, 1, 3) => Some(0),
        (5, 0, 3) => Some(0),
        _ => None,
    }
}

/// Simple cycles of length 3..=MAX_RING_SIZE through ring bonds, each
/// reported once as an atom sequence starting at its smallest atom.
fn small_cycles(g: &MolGraph, ring: &[bool]) -> Vec<Vec<usize>> {
    let n = g.atom_count();
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(MAX_RING_SIZE);
    let mut on_path = vec![false; n];
    for start in 0..n {
        path.clear();
        path.push(start);
        on_path[start] = true;
        extend(g, ring, start, &mut path, &mut on_path, &mut out);
        on_path[start] = false;
        if out.len() >= MAX_CYCLES {
            break;
        }
    }
    out
}

fn extend(
    g: &MolGraph,
    ring: &[bool],
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if out.len() >= MAX_CYCLES {
        return;
    }
    let v = *path.last().expect("path starts non-empty");
    for &(u, bi) in g.neighbors(v) {
        if !ring[bi] {
            continue;
        }
        if u == start && path.len() >= 3 {
            if path[1] < path[path.len() - 1] {
                out.push(path.clone());
            }
            continue;
        }
        if u <= start || on_path[u] || path.len() >= MAX_RING_SIZE {
            continue;
        }
        path.push(u);
        on_path[u] = true;
        extend(g, ring, start, path, on_path, out);
        on_path[u] = false;
        path.pop();
    }
}

/// Marks atoms and bonds of every 4n+2 π-electron ring as aromatic.
/// `g` must be the Kekulé structure described by `atoms`/`bonds`.
pub(super) fn perceive(g: &MolGraph, atoms: &mut [Atom], bonds: &mut [Bond]) {
    let ring = g.ring_bonds();
    if !ring.iter().any(|r| *r) {
        return;
    }
    let electrons: Vec<Option<u8>> = (0..g.atom_count()).map(|i| pi_electrons(g, &ring, i)).collect();
    let mut aromatic_bond = vec![false; bonds.len()];
    for cycle in small_cycles(g, &ring) {
        let mut total = 0u32;
        let mut ok = true;
        for &a in &cycle {
            match electrons[a] {
                Some(e) => total += e as u32,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || total % 4 != 2 {
            continue;
        }
        for k in 0..cycle.len() {
            let a = cycle[k];
            let b = cycle[(k + 1) % cycle.len()];
            let bi = g.bond_between(a, b).expect("cycle edge exists");
            aromatic_bond[bi] = true;
        }
    }
    for (i, bond) in bonds.iter_mut().enumerate() {
        if aromatic_bond[i] {
            bond.order = BondOrder::Aromatic;
            atoms[bond.a].aromatic = true;
            atoms[bond.b].aromatic = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::molgraph::parse_smiles;

    fn aromatic_atoms(smiles: &str) -> usize {
        parse_smiles(smiles).unwrap().atoms().iter().filter(|a| a.aromatic).count()
    }

    #[test]
    fn hueckel_cases() {
        assert_eq!(aromatic_atoms("C1=CC=CC=C1"), 6);
        assert_eq!(aromatic_atoms("c1ccccc1"), 6);
        assert_eq!(aromatic_atoms("c1ccncc1"), 6);
        assert_eq!(aromatic_atoms("c1cc[nH]c1"), 5);
        assert_eq!(aromatic_atoms("c1ccoc1"), 5);
        assert_eq!(aromatic_atoms("c1ccsc1"), 5);
        assert_eq!(aromatic_atoms("c1ccc2ccccc2c1"), 10);
        assert_eq!(aromatic_atoms("c1ccc2[nH]ccc2c1"), 9);
        assert_eq!(aromatic_atoms("O=c1cccc[nH]1"), 6);
        assert_eq!(aromatic_atoms("C1=CCC=C1"), 0);
        assert_eq!(aromatic_atoms("O=C1C=CC(=O)C=C1"), 0);
        assert_eq!(aromatic_atoms("C1=CC=CC=CC=C1"), 0);
        assert_eq!(aromatic_atoms("C1CCCCC1"), 0);
        assert_eq!(aromatic_atoms("Cn1cccc1"), 5);
    }

    #[test]
    fn kekulization_round_trip() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let k = g.kekulize().unwrap();
        let doubles = k.bonds().iter().filter(|b| b.order == super::BondOrder::Double).count();
        assert_eq!(doubles, 5);
        assert!(parse_smiles("c1cccc1").is_err());
    }
}

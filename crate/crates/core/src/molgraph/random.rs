//! Random valid molecules, atom permutations and SMILES spellings for
//! property tests and synthetic corpora.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{write_smiles, BondOrder, Element, MolBuilder, MolGraph, PendingAtom};

#[derive(Debug, Clone, Copy)]
pub struct RandomMolConfig {
    pub min_atoms: usize,
    pub max_atoms: usize,
    /// Probability that an atom is a charged N+ or O- instead of neutral.
    pub charge_prob: f64,
    /// Probability of appending a second, disconnected fragment.
    pub fragment_prob: f64,
}

impl Default for RandomMolConfig {
    fn default() -> Self {
        RandomMolConfig { min_atoms: 2, max_atoms: 24, charge_prob: 0.02, fragment_prob: 0.03 }
    }
}

struct Grower {
    builder: MolBuilder,
    used: Vec<u8>,
    max: Vec<u8>,
    adj: Vec<Vec<usize>>,
}

const ELEMENTS: [(Element, u32); 9] = [
    (Element::C, 62),
    (Element::N, 12),
    (Element::O, 12),
    (Element::S, 4),
    (Element::F, 3),
    (Element::CL, 3),
    (Element::BR, 2),
    (Element::P, 1),
    (Element::B, 1),
];

impl Grower {
    fn new() -> Grower {
        Grower { builder: MolBuilder::new(), used: Vec::new(), max: Vec::new(), adj: Vec::new() }
    }

    fn len(&self) -> usize {
        self.used.len()
    }

    fn atom(&mut self, element: Element, charge: i8) -> usize {
        let max = element.max_valence(charge).unwrap_or(0);
        // Keep S and P at their lowest valence most of the time.
        let max = match element.atomic_number() {
            15 | 16 => max.min(element.valences(charge).map_or(max, |v| v[0]) + 2),
            _ => max,
        };
        self.used.push(0);
        self.max.push(max);
        self.adj.push(Vec::new());
        self.builder.add_atom(PendingAtom { element, formal_charge: charge, hydrogens: None, aromatic: false })
    }

    fn free(&self, i: usize) -> u8 {
        self.max[i] - self.used[i]
    }

    fn bond(&mut self, a: usize, b: usize, order: u8) {
        self.builder.add_bond(a, b, BondOrder::from_valence(order).expect("order 1..=3")).expect("fresh bond");
        self.used[a] += order;
        self.used[b] += order;
        self.adj[a].push(b);
        self.adj[b].push(a);
    }

    fn random_atom<R: Rng>(&mut self, rng: &mut R, cfg: &RandomMolConfig) -> usize {
        if rng.gen_bool(cfg.charge_prob) {
            return if rng.gen_bool(0.5) { self.atom(Element::N, 1) } else { self.atom(Element::O, -1) };
        }
        let total: u32 = ELEMENTS.iter().map(|e| e.1).sum();
        let mut pick = rng.gen_range(0..total);
        for &(e, w) in &ELEMENTS {
            if pick < w {
                return self.atom(e, 0);
            }
            pick -= w;
        }
        unreachable!()
    }

    /// Adds a ring and returns its atoms in ring order.
    fn ring<R: Rng>(&mut self, rng: &mut R) -> Vec<usize> {
        let kind = rng.gen_range(0..6);
        let (size, hetero, aromatic) = match kind {
            0 | 1 => (6, None, true),
            2 => (6, Some(Element::N), true),
            3 => (5, Some([Element::N, Element::O, Element::S][rng.gen_range(0..3)]), true),
            _ => (rng.gen_range(3..=7), if rng.gen_bool(0.3) { Some(Element::N) } else { None }, false),
        };
        let atoms: Vec<usize> = (0..size)
            .map(|k| if k == 0 { self.atom(hetero.unwrap_or(Element::C), 0) } else { self.atom(Element::C, 0) })
            .collect();
        for k in 0..size {
            let a = atoms[k];
            let b = atoms[(k + 1) % size];
            let order = match (aromatic, size) {
                // Benzene-like: alternate starting at the first bond.
                (true, 6) => 1 + (k % 2 == 0) as u8,
                // Five-membered: the heteroatom at 0 takes two single bonds.
                (true, 5) => 1 + (k == 1 || k == 3) as u8,
                _ => 1,
            };
            self.bond(a, b, order);
        }
        atoms
    }

    fn distance(&self, from: usize, to: usize, limit: usize) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[from] = 0;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                return Some(dist[v]);
            }
            if dist[v] >= limit {
                continue;
            }
            for &u in &self.adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        None
    }
}

fn grow<R: Rng>(rng: &mut R, cfg: &RandomMolConfig, target: usize) -> MolGraph {
    loop {
        let mut g = Grower::new();
        if rng.gen_bool(0.5) {
            g.ring(rng);
        } else {
            let mut first = g.random_atom(rng, cfg);
            while g.max[first] == 0 && target > 1 {
                first = g.random_atom(rng, cfg);
            }
        }
        let mut attempts = 0;
        while g.len() < target && attempts < 200 {
            attempts += 1;
            let open: Vec<usize> = (0..g.len()).filter(|&i| g.free(i) > 0).collect();
            let Some(&anchor) = open.choose(rng) else { break };
            let action = rng.gen_range(0..100);
            if action < 72 {
                let new = g.random_atom(rng, cfg);
                let cap = g.free(anchor).min(g.free(new)).min(3);
                if cap == 0 {
                    // Leave the isolated atom out: rebuild is simpler than undo.
                    return grow(rng, cfg, target);
                }
                let order = match rng.gen_range(0..100) {
                    0..=79 => 1,
                    80..=94 => 2,
                    _ => 3,
                }
                .min(cap);
                g.bond(anchor, new, order);
            } else if action < 87 {
                if g.len() + 5 > target + 2 {
                    continue;
                }
                let ring = g.ring(rng);
                let attach = *ring.iter().find(|&&a| g.free(a) > 0).expect("ring atoms keep free valence");
                g.bond(anchor, attach, 1);
            } else {
                let Some(&other) = open.choose(rng) else { continue };
                if other == anchor || g.adj[anchor].contains(&other) {
                    continue;
                }
                if let Some(d) = g.distance(anchor, other, 7) {
                    if d >= 2 {
                        g.bond(anchor, other, 1);
                    }
                }
            }
        }
        if let Ok(mol) = g.builder.build() {
            return mol;
        }
    }
}

/// A random connected (occasionally two-fragment) molecule.
pub fn random_molecule<R: Rng>(rng: &mut R, cfg: &RandomMolConfig) -> MolGraph {
    let target = rng.gen_range(cfg.min_atoms..=cfg.max_atoms);
    let mol = grow(rng, cfg, target.max(1));
    if rng.gen_bool(cfg.fragment_prob) {
        let size = rng.gen_range(1..=4);
        let extra = grow(rng, cfg, size);
        return mol.disjoint_union(&extra);
    }
    mol
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// A valid, usually non-canonical SMILES spelling of `g`.
pub fn random_smiles<R: Rng>(rng: &mut R, g: &MolGraph) -> String {
    let ranks = random_permutation(rng, g.atom_count());
    write_smiles(g, &ranks)
}

//! Bit-vector fingerprints: Morgan (circular), linear paths, Tanimoto.

use std::fmt;
use std::str::FromStr;

use crate::molgraph::MolGraph;

pub const DEFAULT_WIDTH: usize = 2048;

/// Seed of [`StableHasher`]. Fixed so that fingerprints are reproducible
/// across processes and platforms.
pub const HASH_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Order-sensitive 64-bit hash over a sequence of integers.
#[derive(Debug, Clone, Copy)]
pub struct StableHasher(u64);

impl Default for StableHasher {
    fn default() -> Self {
        StableHasher(HASH_SEED)
    }
}

impl StableHasher {
    pub fn new() -> StableHasher {
        StableHasher::default()
    }

    pub fn write(&mut self, v: u64) -> &mut Self {
        self.0 = fmix64(self.0.rotate_left(31) ^ v.wrapping_add(HASH_SEED)).wrapping_add(0x632b_e59b_d9b4_e019);
        self
    }

    pub fn finish(&self) -> u64 {
        fmix64(self.0)
    }
}

pub fn hash_values(values: &[u64]) -> u64 {
    let mut h = StableHasher::new();
    for &v in values {
        h.write(v);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("malformed fingerprint text: {0}")]
    Parse(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}

/// Fixed-width bit set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn new(width: usize) -> Fingerprint {
        Fingerprint { width, words: vec![0; width.div_ceil(64)] }
    }

    pub fn from_bits(width: usize, bits: &[usize]) -> Fingerprint {
        let mut fp = Fingerprint::new(width);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} out of range for width {}", self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.get(b)).collect()
    }

    fn set_hashed(&mut self, h: u64) {
        if self.width > 0 {
            self.set((h % self.width as u64) as usize);
        }
    }

    /// Hex encoding `width:hex`, bytes in bit order with bit 0 as the least
    /// significant bit of the first byte.
    pub fn to_hex(&self) -> String {
        let mut out = format!("{}:", self.width);
        for byte in 0..self.width.div_ceil(8) {
            let b = (self.words[byte / 8] >> (8 * (byte % 8))) & 0xff;
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Fingerprint {
    type Err = FingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FingerprintError::Parse(s.to_string());
        let (w, hex) = s.split_once(':').ok_or_else(bad)?;
        let width: usize = w.parse().map_err(|_| bad())?;
        if hex.len() != 2 * width.div_ceil(8) {
            return Err(bad());
        }
        let mut fp = Fingerprint::new(width);
        for byte in 0..width.div_ceil(8) {
            let b = u64::from_str_radix(&hex[2 * byte..2 * byte + 2], 16).map_err(|_| bad())?;
            for bit in 0..8 {
                if b >> bit & 1 == 1 {
                    let k = byte * 8 + bit;
                    if k >= width {
                        return Err(bad());
                    }
                    fp.set(k);
                }
            }
        }
        Ok(fp)
    }
}

/// |a ∧ b| / |a ∨ b|, with two empty fingerprints scoring 1.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    Ok(if either == 0 { 1.0 } else { both as f64 / either as f64 })
}

fn atom_invariant(g: &MolGraph, ring: &[bool], i: usize) -> u64 {
    let a = g.atom(i);
    hash_values(&[
        a.element.atomic_number() as u64,
        g.degree(i) as u64,
        a.explicit_h as u64,
        (a.formal_charge as i64) as u64,
        a.aromatic as u64,
        ring[i] as u64,
    ])
}

/// Circular fingerprint: every atom environment up to `radius` bonds sets
/// one bit.
pub fn morgan(g: &MolGraph, radius: usize, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::new(width);
    let ring = g.ring_atoms();
    let mut inv: Vec<u64> = (0..g.atom_count()).map(|i| atom_invariant(g, &ring, i)).collect();
    for r in 0..=radius {
        if r > 0 {
            inv = (0..g.atom_count())
                .map(|i| {
                    let mut nb: Vec<(u64, u64)> =
                        g.neighbors(i).iter().map(|&(u, bi)| (g.bonds()[bi].order.code() as u64, inv[u])).collect();
                    nb.sort_unstable();
                    let mut h = StableHasher::new();
                    h.write(r as u64).write(inv[i]);
                    for (b, x) in nb {
                        h.write(b).write(x);
                    }
                    h.finish()
                })
                .collect();
        }
        for &x in &inv {
            fp.set_hashed(hash_values(&[r as u64, x]));
        }
    }
    fp
}

/// Linear path fingerprint over simple paths of `min_len..=max_len` bonds.
pub fn path_fp(g: &MolGraph, min_len: usize, max_len: usize, width: usize) -> Result<Fingerprint, FingerprintError> {
    if min_len < 1 || min_len > max_len || max_len > 7 {
        return Err(FingerprintError::Params(format!("need 1 <= min_len <= max_len <= 7, got {min_len}..{max_len}")));
    }
    let mut fp = Fingerprint::new(width);
    let labels: Vec<u64> = g
        .atoms()
        .iter()
        .map(|a| hash_values(&[a.element.atomic_number() as u64, a.aromatic as u64, (a.formal_charge as i64) as u64]))
        .collect();
    let mut path = Vec::new();
    let mut on_path = vec![false; g.atom_count()];
    for start in 0..g.atom_count() {
        path.push(start);
        on_path[start] = true;
        walk(g, &labels, min_len, max_len, &mut path, &mut on_path, &mut fp);
        on_path[start] = false;
        path.pop();
    }
    Ok(fp)
}

fn walk(
    g: &MolGraph,
    labels: &[u64],
    min_len: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    fp: &mut Fingerprint,
) {
    let bonds = path.len() - 1;
    if bonds >= min_len && path[0] < path[bonds] {
        fp.set_hashed(path_hash(g, labels, path));
    }
    if bonds == max_len {
        return;
    }
    let v = path[bonds];
    for &(u, _) in g.neighbors(v) {
        if on_path[u] {
            continue;
        }
        on_path[u] = true;
        path.push(u);
        walk(g, labels, min_len, max_len, path, on_path, fp);
        path.pop();
        on_path[u] = false;
    }
}

/// Hash of a path read in whichever direction gives the smaller sequence.
fn path_hash(g: &MolGraph, labels: &[u64], path: &[usize]) -> u64 {
    let seq = |atoms: &mut dyn Iterator<Item = usize>| {
        let atoms: Vec<usize> = atoms.collect();
        let mut out = vec![labels[atoms[0]]];
        for w in atoms.windows(2) {
            let bi = g.bond_between(w[0], w[1]).expect("path edge");
            out.push(g.bonds()[bi].order.code() as u64);
            out.push(labels[w[1]]);
        }
        out
    };
    let fwd = seq(&mut path.iter().copied());
    let rev = seq(&mut path.iter().rev().copied());
    let mut best = fwd.min(rev);
    best.insert(0, (path.len() - 1) as u64);
    hash_values(&best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn morgan_small_cases() {
        assert_eq!(morgan(&mol("C"), 0, 2048).count_ones(), 1);
        assert_eq!(morgan(&mol("CC"), 0, 2048).count_ones(), 1);
        assert_eq!(morgan(&mol("CC"), 1, 2048).count_ones(), 2);
        assert_eq!(morgan(&mol("CCO"), 0, 2048).count_ones(), 3);
    }

    #[test]
    fn path_small_cases() {
        assert_eq!(path_fp(&mol("C"), 1, 7, 2048).unwrap().count_ones(), 0);
        assert_eq!(path_fp(&mol("CC"), 1, 1, 2048).unwrap().count_ones(), 1);
        assert_ne!(path_fp(&mol("CCCC"), 1, 7, 2048).unwrap(), path_fp(&mol("CC(C)C"), 1, 7, 2048).unwrap());
        assert!(path_fp(&mol("CC"), 0, 1, 2048).is_err());
        assert!(path_fp(&mol("CC"), 2, 8, 2048).is_err());
    }

    #[test]
    fn tanimoto_cases() {
        let a = Fingerprint::from_bits(16, &[1, 2, 3]);
        let b = Fingerprint::from_bits(16, &[2, 3, 4]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto(&a, &Fingerprint::from_bits(16, &[7])).unwrap(), 0.0);
        assert_eq!(tanimoto(&Fingerprint::new(16), &Fingerprint::new(16)).unwrap(), 1.0);
        assert!(tanimoto(&a, &Fingerprint::new(8)).is_err());
    }

    #[test]
    fn hex_round_trip() {
        let fp = Fingerprint::from_bits(2048, &[0, 1, 9, 2047]);
        let s = fp.to_hex();
        assert!(s.starts_with("2048:0302"));
        assert_eq!(s.parse::<Fingerprint>().unwrap(), fp);
        let odd = Fingerprint::from_bits(12, &[11]);
        assert_eq!(odd.to_hex(), "12:0008");
        assert_eq!(odd.to_hex().parse::<Fingerprint>().unwrap(), odd);
        assert!("12:00ff".parse::<Fingerprint>().is_err());
    }

    #[test]
    fn hash_is_pinned() {
        // Guards cross-platform reproducibility of every hashed fingerprint.
        assert_eq!(hash_values(&[]), fmix64(HASH_SEED));
        assert_eq!(hash_values(&[1, 2]), hash_values(&[1, 2]));
        assert_ne!(hash_values(&[1, 2]), hash_values(&[2, 1]));
    }
}

//! SELFIES encoding and decoding.
//!
//! The decoder follows the state-machine semantics that make every token
//! string decodable: each atom tracks its remaining valence, requested bond
//! orders are capped by what both ends can still accept, and branch and ring
//! tokens that cannot be honoured are dropped.

use std::collections::HashMap;

use super::canon::canonicalize;
use super::{Atom, Bond, BondOrder, Element, MolError, MolGraph};

/// Tokens that encode hexadecimal digits of branch lengths and ring
/// offsets, in digit order.
pub const SELFIES_INDEX_ALPHABET: [&str; 16] = [
    "[C]", "[Ring1]", "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]", "[=Branch2]",
    "[#Branch2]", "[O]", "[N]", "[=N]", "[=C]", "[#C]", "[S]", "[P]",
];

/// Splits a SELFIES string into bracketed tokens and `.` separators.
pub fn selfies_tokens(text: &str) -> Result<Vec<String>, MolError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '.' => out.push(".".to_string()),
            '[' => {
                let mut tok = String::from("[");
                let mut closed = false;
                for (_, c) in chars.by_ref() {
                    tok.push(c);
                    if c == ']' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(MolError::UnknownToken(text[i..].to_string()));
                }
                out.push(tok);
            }
            c if c.is_whitespace() => {}
            _ => {
                let end = text[i..].find('[').map_or(text.len(), |k| i + k);
                return Err(MolError::UnknownToken(text[i..end].to_string()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Atom { bond: u8, element: Element, hydrogens: Option<u8>, charge: i8 },
    Branch { bond: u8, len: u8 },
    Ring { bond: u8, len: u8 },
    Nop,
    Dot,
}

fn bond_prefix(s: &str) -> (u8, &str) {
    match s.as_bytes().first() {
        Some(b'=') => (2, &s[1..]),
        Some(b'#') => (3, &s[1..]),
        Some(b'/') | Some(b'\\') => (1, &s[1..]),
        _ => (1, s),
    }
}

fn parse_token(tok: &str) -> Result<Token, MolError> {
    let unknown = || MolError::UnknownToken(tok.to_string());
    if tok == "." {
        return Ok(Token::Dot);
    }
    let inner = tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(unknown)?;
    if inner == "nop" {
        return Ok(Token::Nop);
    }
    let (bond, body) = bond_prefix(inner);
    for (word, is_branch) in [("Branch", true), ("Ring", false)] {
        if let Some(rest) = body.strip_prefix(word) {
            let len = match rest {
                "1" => 1,
                "2" => 2,
                "3" => 3,
                _ => return Err(unknown()),
            };
            return Ok(if is_branch { Token::Branch { bond, len } } else { Token::Ring { bond, len } });
        }
    }
    let b = body.as_bytes();
    if b.is_empty() || !b[0].is_ascii_uppercase() {
        return Err(unknown());
    }
    let mut pos = 1;
    while pos < b.len() && b[pos].is_ascii_lowercase() {
        pos += 1;
    }
    let element = Element::from_symbol(&body[..pos]).ok_or_else(unknown)?;
    if element.valences(0).is_none() {
        return Err(unknown());
    }
    while pos < b.len() && b[pos] == b'@' {
        pos += 1;
    }
    let mut hydrogens = None;
    if pos < b.len() && b[pos] == b'H' {
        pos += 1;
        let start = pos;
        while pos < b.len() && b[pos].is_ascii_digit() {
            pos += 1;
        }
        hydrogens = Some(if start == pos { 1 } else { body[start..pos].parse::<u8>().map_err(|_| unknown())? });
    }
    let mut charge: i32 = 0;
    if pos < b.len() && (b[pos] == b'+' || b[pos] == b'-') {
        let sign = if b[pos] == b'+' { 1 } else { -1 };
        let sym = b[pos];
        pos += 1;
        let start = pos;
        while pos < b.len() && b[pos].is_ascii_digit() {
            pos += 1;
        }
        let mut magnitude = if start == pos { 1 } else { body[start..pos].parse::<i32>().map_err(|_| unknown())? };
        if start == pos {
            while pos < b.len() && b[pos] == sym {
                magnitude += 1;
                pos += 1;
            }
        }
        charge = sign * magnitude;
        if !(-8..=8).contains(&charge) {
            return Err(unknown());
        }
    }
    if pos != b.len() {
        return Err(unknown());
    }
    let charge = charge as i8;
    if element.valences(charge).is_none() {
        return Err(unknown());
    }
    Ok(Token::Atom { bond, element, hydrogens, charge })
}

fn index_value(tokens: &[&str]) -> usize {
    tokens.iter().fold(0, |acc, t| acc * 16 + SELFIES_INDEX_ALPHABET.iter().position(|a| a == t).unwrap_or(0))
}

struct DecodedAtom {
    element: Element,
    charge: i8,
    fixed_h: Option<u8>,
    capacity: u8,
}

struct Decoder<'a> {
    raw: &'a [&'a str],
    tokens: &'a [Token],
    atoms: Vec<DecodedAtom>,
    free: Vec<u8>,
    bonds: HashMap<(usize, usize), u8>,
    bond_list: Vec<(usize, usize)>,
    rings: Vec<(usize, usize, u8)>,
}

impl<'a> Decoder<'a> {
    fn add_bond(&mut self, a: usize, b: usize, order: u8) {
        let key = (a.min(b), a.max(b));
        self.free[a] -= order;
        self.free[b] -= order;
        match self.bonds.get_mut(&key) {
            Some(o) => *o += order,
            None => {
                self.bonds.insert(key, order);
                self.bond_list.push(key);
            }
        }
    }

    /// Decodes `tokens[range]` as a chain rooted at `root`. `state` caps the
    /// first bond; `None` starts a new fragment.
    fn derive(&mut self, start: usize, end: usize, mut prev: Option<usize>, mut state: Option<u8>) {
        let mut i = start;
        while i < end {
            if state == Some(0) {
                return;
            }
            let tok = self.tokens[i];
            i += 1;
            match tok {
                Token::Nop | Token::Dot => {}
                Token::Atom { bond, element, hydrogens, charge } => {
                    let max = element.max_valence(charge).expect("checked at tokenization");
                    // Charged atoms without an H count carry none.
                    let fixed_h = hydrogens.or((charge != 0).then_some(0)).map(|h| h.min(max));
                    let capacity = max - fixed_h.unwrap_or(0);
                    let order = match (prev, state) {
                        (Some(_), Some(s)) => bond.min(s).min(capacity),
                        _ => 0,
                    };
                    if prev.is_some() && order == 0 {
                        continue;
                    }
                    let idx = self.atoms.len();
                    self.atoms.push(DecodedAtom { element, charge, fixed_h, capacity });
                    self.free.push(capacity);
                    if let Some(p) = prev {
                        self.add_bond(p, idx, order);
                    }
                    prev = Some(idx);
                    state = Some(self.free[idx]);
                }
                Token::Branch { bond, len } => {
                    let take = (len as usize).min(end - i);
                    let q = index_value(&self.raw[i..i + take]);
                    i += take;
                    let Some(root) = prev else { continue };
                    if self.free[root] < 2 {
                        continue;
                    }
                    let body_end = (i + q + 1).min(end);
                    let init = (self.free[root] - 1).min(bond);
                    self.derive(i, body_end, Some(root), Some(init));
                    i = body_end;
                    state = Some(self.free[root]);
                }
                Token::Ring { bond, len } => {
                    let take = (len as usize).min(end - i);
                    let q = index_value(&self.raw[i..i + take]);
                    i += take;
                    let Some(src) = prev else { continue };
                    if src == 0 {
                        continue;
                    }
                    let target = src.saturating_sub(q + 1);
                    let order = bond.min(self.free[src]);
                    if order == 0 {
                        continue;
                    }
                    self.free[src] -= order;
                    self.rings.push((target, src, order));
                    state = Some(self.free[src]);
                }
            }
        }
    }

    fn resolve_rings(&mut self) {
        let rings = std::mem::take(&mut self.rings);
        for (target, src, reserved) in rings {
            self.free[src] += reserved;
            let key = (target.min(src), target.max(src));
            let existing = self.bonds.get(&key).copied().unwrap_or(0);
            let room = 3u8.saturating_sub(existing);
            let order = reserved.min(self.free[target]).min(self.free[src]).min(room);
            if order > 0 {
                self.add_bond(target, src, order);
            }
        }
    }

    fn finish(self) -> Result<MolGraph, MolError> {
        let mut sums = vec![0u8; self.atoms.len()];
        let mut bonds = Vec::with_capacity(self.bond_list.len());
        for &(a, b) in &self.bond_list {
            let order = self.bonds[&(a, b)];
            sums[a] += order;
            sums[b] += order;
            bonds.push(Bond { a, b, order: BondOrder::from_valence(order).expect("order capped at 3") });
        }
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let h = match d.fixed_h {
                    Some(h) => h,
                    None => d.element.target_valence(d.charge, sums[i]).map_or(0, |t| t - sums[i]),
                };
                debug_assert!(sums[i] <= d.capacity);
                Atom { element: d.element, formal_charge: d.charge, explicit_h: h, aromatic: false }
            })
            .collect();
        MolGraph::from_kekule(atoms, bonds)
    }
}

/// Decodes a SELFIES string. Only unknown tokens are errors.
pub fn parse_selfies(text: &str) -> Result<MolGraph, MolError> {
    let raw_owned = selfies_tokens(text)?;
    let raw: Vec<&str> = raw_owned.iter().map(String::as_str).collect();
    let tokens = raw.iter().map(|t| parse_token(t)).collect::<Result<Vec<_>, _>>()?;
    let mut dec = Decoder {
        raw: &raw,
        tokens: &tokens,
        atoms: Vec::new(),
        free: Vec::new(),
        bonds: HashMap::new(),
        bond_list: Vec::new(),
        rings: Vec::new(),
    };
    let mut start = 0;
    for i in 0..=tokens.len() {
        if i == tokens.len() || tokens[i] == Token::Dot {
            dec.derive(start, i, None, None);
            start = i + 1;
        }
    }
    dec.resolve_rings();
    dec.finish()
}

// ---------------------------------------------------------------------------
// Encoder

fn bond_symbol(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        _ => "",
    }
}

fn index_tokens(q: usize) -> Vec<&'static str> {
    let digits = if q < 16 {
        1
    } else if q < 256 {
        2
    } else {
        3
    };
    (0..digits).rev().map(|k| SELFIES_INDEX_ALPHABET[(q >> (4 * k)) & 15]).collect()
}

fn atom_token(kek: &MolGraph, i: usize, bond: &str) -> String {
    let atom = kek.atom(i);
    let sum = kek.base_bond_sum(i);
    let implicit = atom.element.target_valence(atom.formal_charge, sum).map(|t| t - sum);
    let mut tok = format!("[{bond}{}", atom.element.symbol());
    let explicit_h = atom.formal_charge != 0 || implicit != Some(atom.explicit_h);
    if explicit_h {
        tok.push_str(&format!("H{}", atom.explicit_h));
    }
    if atom.formal_charge != 0 {
        tok.push_str(&format!("{:+}", atom.formal_charge));
    }
    tok.push(']');
    tok
}

struct Encoder<'a> {
    kek: &'a MolGraph,
    ranks: &'a [usize],
    visited: Vec<bool>,
    position: Vec<usize>,
    counter: usize,
    used_bond: Vec<bool>,
    /// Ring closures keyed by the later atom: (earlier atom, bond index).
    closures: HashMap<usize, Vec<(usize, usize)>>,
    children: HashMap<usize, Vec<(usize, usize)>>,
}

impl<'a> Encoder<'a> {
    fn sorted_neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut nb = self.kek.neighbors(v).to_vec();
        nb.sort_by_key(|&(u, _)| self.ranks[u]);
        nb
    }

    /// Builds the spanning tree and closure lists with the same traversal
    /// the decoder will replay.
    fn plan(&mut self, root: usize) {
        self.visited[root] = true;
        self.position[root] = self.counter;
        self.counter += 1;
        let mut stack = vec![(root, self.sorted_neighbors(root), 0usize)];
        while let Some((v, nb, cursor)) = stack.last_mut() {
            if *cursor >= nb.len() {
                stack.pop();
                continue;
            }
            let (u, bi) = nb[*cursor];
            *cursor += 1;
            let v = *v;
            if self.used_bond[bi] {
                continue;
            }
            self.used_bond[bi] = true;
            if self.visited[u] {
                self.closures.entry(v).or_default().push((u, bi));
            } else {
                self.visited[u] = true;
                self.position[u] = self.counter;
                self.counter += 1;
                self.children.entry(v).or_default().push((u, bi));
                let nbu = self.sorted_neighbors(u);
                stack.push((u, nbu, 0));
            }
        }
    }

    fn emit(&self, v: usize, incoming: &str, out: &mut Vec<String>) {
        out.push(atom_token(self.kek, v, incoming));
        if let Some(list) = self.closures.get(&v) {
            let mut list = list.clone();
            list.sort_by_key(|&(u, _)| self.position[u]);
            for (u, bi) in list {
                let q = self.position[v] - self.position[u] - 1;
                out.push(format!("[{}Ring{}]", bond_symbol(self.kek.bonds()[bi].order), index_tokens(q).len()));
                out.extend(index_tokens(q).into_iter().map(String::from));
            }
        }
        if let Some(kids) = self.children.get(&v) {
            let last = kids.len() - 1;
            for (k, &(u, bi)) in kids.iter().enumerate() {
                let sym = bond_symbol(self.kek.bonds()[bi].order);
                if k == last {
                    self.emit(u, sym, out);
                } else {
                    let mut body = Vec::new();
                    self.emit(u, sym, &mut body);
                    let q = body.len() - 1;
                    let idx = index_tokens(q);
                    out.push(format!("[{sym}Branch{}]", idx.len()));
                    out.extend(idx.into_iter().map(String::from));
                    out.extend(body);
                }
            }
        }
    }
}

/// Encodes a graph as SELFIES, traversing atoms in canonical order.
pub fn to_selfies(g: &MolGraph) -> Result<String, MolError> {
    for atom in g.atoms() {
        if atom.element.valences(atom.formal_charge).is_none() {
            return Err(MolError::UnsupportedElement(atom.element.symbol().to_string()));
        }
    }
    let kek = g.kekulize()?;
    let form = canonicalize(g);
    let n = g.atom_count();
    let mut enc = Encoder {
        kek: &kek,
        ranks: &form.ranks,
        visited: vec![false; n],
        position: vec![0; n],
        counter: 0,
        used_bond: vec![false; kek.bond_count()],
        closures: HashMap::new(),
        children: HashMap::new(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| form.ranks[i]);
    let mut roots = Vec::new();
    for &v in &order {
        if !enc.visited[v] {
            roots.push(v);
            enc.plan(v);
        }
    }
    let mut fragments = Vec::new();
    for root in roots {
        let mut tokens = Vec::new();
        enc.emit(root, "", &mut tokens);
        fragments.push(tokens.concat());
    }
    Ok(fragments.join("."))
}

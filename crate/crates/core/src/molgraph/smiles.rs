use std::collections::HashMap;

use super::{Atom, BondOrder, Element, MolBuilder, MolError, MolGraph, PendingAtom};

#[derive(Debug, Clone, Copy, PartialEq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    builder: MolBuilder,
    aromatic: Vec<bool>,
}

fn syntax(position: usize, message: impl Into<String>) -> MolError {
    MolError::Syntax { position, message: message.into() }
}

/// Parses a SMILES string. Stereo descriptors (`@`, `/`, `\`) and isotopes
/// are accepted and discarded; atom classes are ignored.
pub fn parse_smiles(text: &str) -> Result<MolGraph, MolError> {
    if text.trim().is_empty() {
        return Err(MolError::Empty);
    }
    let mut p = Parser { text: text.as_bytes(), pos: 0, builder: MolBuilder::new(), aromatic: Vec::new() };
    p.parse()?;
    p.builder.build()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn parse(&mut self) -> Result<(), MolError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSym, usize)> = None;
        let mut branches: Vec<usize> = Vec::new();
        let mut rings: HashMap<u32, (usize, Option<BondSym>, usize)> = HashMap::new();
        let mut dot_pending = false;

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let p = prev.ok_or_else(|| syntax(start, "branch without preceding atom"))?;
                    if pending.is_some() {
                        return Err(syntax(start, "bond before branch"));
                    }
                    branches.push(p);
                    self.pos += 1;
                    if self.peek() == Some(b')') {
                        return Err(syntax(self.pos, "empty branch"));
                    }
                }
                b')' => {
                    if pending.is_some() {
                        return Err(syntax(start, "dangling bond before `)`"));
                    }
                    prev = Some(branches.pop().ok_or_else(|| syntax(start, "unmatched `)`"))?);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(syntax(start, "misplaced `.`"));
                    }
                    prev = None;
                    dot_pending = true;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(syntax(start, "consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(syntax(start, "bond without preceding atom"));
                    }
                    let sym = match c {
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        _ => BondSym::Single,
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'$' => return Err(syntax(start, "quadruple bonds are not supported")),
                b'0'..=b'9' | b'%' => {
                    let p = prev.ok_or_else(|| syntax(start, "ring bond without preceding atom"))?;
                    let label = self.ring_label()?;
                    let sym = pending.take().map(|(s, _)| s);
                    match rings.remove(&label) {
                        Some((other, open_sym, _)) => {
                            if other == p {
                                return Err(syntax(start, "ring bond to itself"));
                            }
                            let sym = match (open_sym, sym) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(syntax(start, "conflicting ring bond symbols"))
                                }
                                (Some(a), _) => Some(a),
                                (None, b) => b,
                            };
                            self.bond(other, p, sym, start)?;
                        }
                        None => {
                            rings.insert(label, (p, sym, start));
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    if let Some(p) = prev {
                        let sym = pending.take().map(|(s, _)| s);
                        self.bond(p, atom, sym, start)?;
                    } else if let Some((_, at)) = pending {
                        return Err(syntax(at, "bond without preceding atom"));
                    }
                    prev = Some(atom);
                    dot_pending = false;
                }
            }
        }
        if let Some((_, at)) = pending {
            return Err(syntax(at.max(self.text.len()), "dangling bond at end of input"));
        }
        if !branches.is_empty() {
            return Err(syntax(self.text.len(), "unclosed branch"));
        }
        if dot_pending {
            return Err(syntax(self.text.len(), "trailing `.`"));
        }
        if let Some((&label, &(_, _, position))) = rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(MolError::UnclosedRing { label, position });
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, MolError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            self.pos += 1;
            let digits = self.text.get(self.pos..self.pos + 2).ok_or_else(|| syntax(start, "`%` needs two digits"))?;
            if !digits.iter().all(u8::is_ascii_digit) {
                return Err(syntax(start, "`%` needs two digits"));
            }
            self.pos += 2;
            Ok(((digits[0] - b'0') * 10 + (digits[1] - b'0')) as u32)
        } else {
            let d = self.text[self.pos] - b'0';
            self.pos += 1;
            Ok(d as u32)
        }
    }

    fn bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, at: usize) -> Result<(), MolError> {
        let order = match sym {
            Some(s) => s.order(),
            None if self.aromatic[a] && self.aromatic[b] => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        if order == BondOrder::Aromatic && !(self.aromatic[a] && self.aromatic[b]) {
            return Err(syntax(at, "aromatic bond between non-aromatic atoms"));
        }
        self.builder.add_bond(a, b, order).map_err(|_| syntax(at, "duplicate bond"))
    }

    fn push(&mut self, atom: PendingAtom) -> usize {
        self.aromatic.push(atom.aromatic);
        self.builder.add_atom(atom)
    }

    fn atom(&mut self) -> Result<usize, MolError> {
        let start = self.pos;
        let c = self.text[self.pos];
        if c == b'[' {
            return self.bracket_atom();
        }
        let two = self.text.get(self.pos..self.pos + 2);
        let (symbol, aromatic, len) = match two {
            Some(b"Cl") => ("Cl", false, 2),
            Some(b"Br") => ("Br", false, 2),
            _ => match c {
                b'B' => ("B", false, 1),
                b'C' => ("C", false, 1),
                b'N' => ("N", false, 1),
                b'O' => ("O", false, 1),
                b'P' => ("P", false, 1),
                b'S' => ("S", false, 1),
                b'F' => ("F", false, 1),
                b'I' => ("I", false, 1),
                b'b' => ("B", true, 1),
                b'c' => ("C", true, 1),
                b'n' => ("N", true, 1),
                b'o' => ("O", true, 1),
                b'p' => ("P", true, 1),
                b's' => ("S", true, 1),
                b'*' => return Err(syntax(start, "wildcard atoms are not supported")),
                _ => return Err(syntax(start, format!("unexpected character `{}`", c as char))),
            },
        };
        self.pos += len;
        let element = Element::from_symbol(symbol).expect("organic subset symbol");
        Ok(self.push(PendingAtom { element, formal_charge: 0, hydrogens: None, aromatic }))
    }

    fn bracket_atom(&mut self) -> Result<usize, MolError> {
        let open = self.pos;
        self.pos += 1;
        let close = self.text[self.pos..]
            .iter()
            .position(|&b| b == b']')
            .map(|i| i + self.pos)
            .ok_or_else(|| syntax(open, "unclosed `[`"))?;
        // isotope
        while self.pos < close && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let (element, aromatic) = self.bracket_symbol(close)?;
        // chirality
        while self.pos < close && self.text[self.pos] == b'@' {
            self.pos += 1;
        }
        while self.pos < close && self.text[self.pos].is_ascii_uppercase() && self.text[self.pos] != b'H' {
            self.pos += 1;
            while self.pos < close && self.text[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let mut hydrogens = 0u8;
        if self.pos < close && self.text[self.pos] == b'H' {
            self.pos += 1;
            hydrogens = 1;
            if self.pos < close && self.text[self.pos].is_ascii_digit() {
                hydrogens = self.text[self.pos] - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if self.pos < close && matches!(self.text[self.pos], b'+' | b'-') {
            let sign = if self.text[self.pos] == b'+' { 1 } else { -1 };
            let sym = self.text[self.pos];
            self.pos += 1;
            let mut magnitude = 1;
            if self.pos < close && self.text[self.pos].is_ascii_digit() {
                let s = self.pos;
                while self.pos < close && self.text[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                magnitude = std::str::from_utf8(&self.text[s..self.pos]).unwrap().parse::<i32>().unwrap_or(99);
            } else {
                while self.pos < close && self.text[self.pos] == sym {
                    magnitude += 1;
                    self.pos += 1;
                }
            }
            charge = sign * magnitude;
            if !(-8..=8).contains(&charge) {
                return Err(syntax(open, "charge out of range"));
            }
        }
        if self.pos < close && self.text[self.pos] == b':' {
            self.pos += 1;
            while self.pos < close && self.text[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos != close {
            return Err(syntax(self.pos, "malformed bracket atom"));
        }
        self.pos = close + 1;
        Ok(self.push(PendingAtom { element, formal_charge: charge as i8, hydrogens: Some(hydrogens), aromatic }))
    }

    fn bracket_symbol(&mut self, close: usize) -> Result<(Element, bool), MolError> {
        let at = self.pos;
        let rest = &self.text[self.pos..close];
        if rest.is_empty() {
            return Err(syntax(at, "empty bracket atom"));
        }
        if rest[0].is_ascii_lowercase() {
            for len in [2usize, 1] {
                if rest.len() >= len {
                    let sym = std::str::from_utf8(&rest[..len]).unwrap();
                    let mut chars = sym.chars();
                    let cap: String = chars.next().unwrap().to_ascii_uppercase().to_string() + chars.as_str();
                    if let Some(e) = Element::from_symbol(&cap).filter(|e| e.can_be_aromatic()) {
                        self.pos += len;
                        return Ok((e, true));
                    }
                }
            }
            return Err(syntax(at, "unknown aromatic element"));
        }
        if !rest[0].is_ascii_uppercase() {
            return Err(syntax(at, "expected element symbol"));
        }
        // Prefer the two-letter reading when it names an element.
        let mut len = 1;
        while len < rest.len() && len < 3 && rest[len].is_ascii_lowercase() {
            len += 1;
        }
        for l in (1..=len).rev() {
            let sym = std::str::from_utf8(&rest[..l]).unwrap();
            if let Some(e) = Element::from_symbol(sym) {
                self.pos += l;
                return Ok((e, false));
            }
        }
        Err(syntax(at, format!("unknown element `{}`", std::str::from_utf8(&rest[..len]).unwrap())))
    }
}

// ---------------------------------------------------------------------------
// Writer

/// How the parser will read an atom written without brackets.
fn organic_form_ok(g: &MolGraph, kek: &MolGraph, i: usize) -> bool {
    let atom = g.atom(i);
    if atom.formal_charge != 0 || !atom.element.is_organic_subset() {
        return false;
    }
    let kek_sum = kek.base_bond_sum(i);
    if !atom.aromatic {
        return atom.element.target_valence(0, kek_sum).map(|t| t - kek_sum) == Some(atom.explicit_h);
    }
    if !atom.element.can_be_aromatic() {
        return false;
    }
    let pending = PendingAtom { element: atom.element, formal_charge: 0, hydrogens: None, aromatic: true };
    let predicted_pi = super::aromatic::needs_pi_pending(&pending, g.base_bond_sum(i));
    let actual_pi = kek.neighbors(i).iter().any(|&(n, bi)| {
        kek.bonds()[bi].order == BondOrder::Double && g.bonds()[g.bond_between(i, n).unwrap()].order == BondOrder::Aromatic
    });
    if predicted_pi != actual_pi {
        return false;
    }
    atom.element.target_valence(0, kek_sum).map(|t| t - kek_sum) == Some(atom.explicit_h)
}

fn atom_text(g: &MolGraph, kek: &MolGraph, i: usize, out: &mut String) {
    let atom: &Atom = g.atom(i);
    let symbol = atom.element.symbol();
    if organic_form_ok(g, kek, i) {
        if atom.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if atom.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match atom.explicit_h {
        0 => {}
        1 => out.push('H'),
        h => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}

fn bond_text(g: &MolGraph, bi: usize) -> &'static str {
    let bond = g.bonds()[bi];
    match bond.order {
        BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Single if g.atom(bond.a).aromatic && g.atom(bond.b).aromatic => "-",
        BondOrder::Single => "",
    }
}

/// Writes SMILES for `g`, traversing each fragment from its lowest-ranked
/// atom and visiting neighbours in rank order. With canonical ranks the
/// output is canonical; with arbitrary ranks it is a valid alternative
/// spelling of the same molecule. Fragments are joined in rank order of
/// their first atom.
pub fn write_smiles(g: &MolGraph, ranks: &[usize]) -> String {
    let mut pieces = fragment_smiles(g, ranks);
    pieces.sort_by_key(|f| f.root_rank);
    pieces.into_iter().map(|f| f.text).collect::<Vec<_>>().join(".")
}

pub(super) struct FragmentText {
    pub root_rank: usize,
    pub text: String,
    /// Atoms in the order they appear in `text`.
    pub order: Vec<usize>,
}

/// SMILES of each connected fragment.
pub(super) fn fragment_smiles(g: &MolGraph, ranks: &[usize]) -> Vec<FragmentText> {
    let n = g.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let kek = g.kekulize().unwrap_or_else(|_| g.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for &root in &order {
        if visited[root] {
            continue;
        }
        // Pass 1: DFS tree and ring-closure discovery.
        let mut preorder = Vec::new();
        let mut pre_index = vec![usize::MAX; n];
        let mut children: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        let mut closures: Vec<usize> = Vec::new();
        let mut is_tree = vec![false; g.bond_count()];
        let mut seen_bond = vec![false; g.bond_count()];
        dfs(g, ranks, root, &mut visited, &mut preorder, &mut pre_index, &mut children, &mut closures, &mut is_tree, &mut seen_bond);

        // Ring closure bookkeeping: opening at the earlier atom in preorder.
        let mut opens: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut closes: HashMap<usize, Vec<usize>> = HashMap::new();
        for &bi in &closures {
            let b = g.bonds()[bi];
            let (first, second) = if pre_index[b.a] < pre_index[b.b] { (b.a, b.b) } else { (b.b, b.a) };
            opens.entry(first).or_default().push(bi);
            closes.entry(second).or_default().push(bi);
        }
        for list in opens.values_mut() {
            list.sort_by_key(|&bi| {
                let b = g.bonds()[bi];
                let other = if pre_index[b.a] < pre_index[b.b] { b.b } else { b.a };
                pre_index[other]
            });
        }
        for list in closes.values_mut() {
            list.sort_by_key(|&bi| {
                let b = g.bonds()[bi];
                let other = if pre_index[b.a] < pre_index[b.b] { b.a } else { b.b };
                pre_index[other]
            });
        }
        let mut text = String::new();
        let mut digits: HashMap<usize, u32> = HashMap::new();
        let mut in_use = vec![false; 100];
        let mut written = Vec::with_capacity(preorder.len());
        emit(g, &kek, root, &children, &opens, &closes, &mut digits, &mut in_use, &mut text, &mut written);
        out.push(FragmentText { root_rank: ranks[root], text, order: written });
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    g: &MolGraph,
    ranks: &[usize],
    root: usize,
    visited: &mut [bool],
    preorder: &mut Vec<usize>,
    pre_index: &mut [usize],
    children: &mut HashMap<usize, Vec<(usize, usize)>>,
    closures: &mut Vec<usize>,
    is_tree: &mut [bool],
    seen_bond: &mut [bool],
) {
    // Explicit stack of (atom, sorted neighbour list, cursor).
    let sorted = |v: usize| {
        let mut nb: Vec<(usize, usize)> = g.neighbors(v).to_vec();
        nb.sort_by_key(|&(u, _)| ranks[u]);
        nb
    };
    visited[root] = true;
    pre_index[root] = preorder.len();
    preorder.push(root);
    let mut stack = vec![(root, sorted(root), 0usize)];
    while let Some((v, nb, cursor)) = stack.last_mut() {
        if *cursor >= nb.len() {
            stack.pop();
            continue;
        }
        let (u, bi) = nb[*cursor];
        *cursor += 1;
        let v = *v;
        if seen_bond[bi] {
            continue;
        }
        seen_bond[bi] = true;
        if visited[u] {
            closures.push(bi);
        } else {
            visited[u] = true;
            is_tree[bi] = true;
            pre_index[u] = preorder.len();
            preorder.push(u);
            children.entry(v).or_default().push((u, bi));
            let nbu = sorted(u);
            stack.push((u, nbu, 0));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn emit(
    g: &MolGraph,
    kek: &MolGraph,
    v: usize,
    children: &HashMap<usize, Vec<(usize, usize)>>,
    opens: &HashMap<usize, Vec<usize>>,
    closes: &HashMap<usize, Vec<usize>>,
    digits: &mut HashMap<usize, u32>,
    in_use: &mut [bool],
    out: &mut String,
    written: &mut Vec<usize>,
) {
    let mut stack: Vec<(usize, Option<usize>, bool, bool)> = vec![(v, None, false, false)];
    // (atom, incoming bond, wrap in branch, is emitted-close-paren marker)
    while let Some((atom, incoming, branch, close_marker)) = stack.pop() {
        if close_marker {
            out.push(')');
            continue;
        }
        if branch {
            out.push('(');
            stack.push((0, None, false, true));
        }
        if let Some(bi) = incoming {
            out.push_str(bond_text(g, bi));
        }
        atom_text(g, kek, atom, out);
        written.push(atom);
        if let Some(list) = closes.get(&atom) {
            for &bi in list {
                let d = digits.remove(&bi).expect("closure opened earlier");
                in_use[d as usize] = false;
                push_digit(out, d);
            }
        }
        if let Some(list) = opens.get(&atom) {
            for &bi in list {
                let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 100 open rings") as u32;
                in_use[d as usize] = true;
                digits.insert(bi, d);
                out.push_str(bond_text(g, bi));
                push_digit(out, d);
            }
        }
        if let Some(kids) = children.get(&atom) {
            // Last child continues the chain; earlier ones are branches.
            // Push in reverse so the first child is emitted first.
            let last = kids.len() - 1;
            for (k, &(u, bi)) in kids.iter().enumerate().rev() {
                stack.push((u, Some(bi), k != last, false));
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push('%');
        out.push_str(&format!("{d:02}"));
    }
}

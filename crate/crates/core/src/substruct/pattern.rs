//! A small SMARTS subset.
//!
//! Atoms: organic symbols (`C` aliphatic, `c` aromatic), `*`, and bracket
//! expressions built from primitives joined by implicit/`&` AND (tightest),
//! `,` OR, and `;` AND (loosest), each optionally negated with `!`.
//! Primitives: element symbols (case gives aromaticity), `#n`, `a`, `A`,
//! `Dn` / `Dn-m` (heavy degree), `Hn` (total H), `Xn` (degree + H), `R`,
//! `+`, `-`, `+n`, `-n`, `+0`, `*`.
//!
//! Bonds: `-` `=` `#` `:` `~`; an omitted bond matches single or aromatic.
//! Branches and ring-closure digits follow SMILES.

use std::fmt;

use crate::molgraph::{parse_smiles, BondOrder, Element, MolBuilder, MolGraph, PendingAtom};

#[derive(Debug, Clone, PartialEq)]
pub struct PatternError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pattern error at {}: {}", self.position, self.message)
    }
}

impl std::error::Error for PatternError {}

fn perr(position: usize, message: impl Into<String>) -> PatternError {
    PatternError { position, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
enum Prim {
    Any,
    Element { z: u8, aromatic: Option<bool> },
    Aromatic(bool),
    Degree(u8, u8),
    Hydrogens(u8),
    Connectivity(u8),
    Ring,
    Charge(i8),
}

#[derive(Debug, Clone, PartialEq)]
struct Literal {
    negated: bool,
    prim: Prim,
}

/// Conjunction (`;`) of disjunctions (`,`) of conjunctions (implicit `&`).
#[derive(Debug, Clone, PartialEq)]
struct AtomQuery(Vec<Vec<Vec<Literal>>>);

#[derive(Debug, Clone, Copy, PartialEq)]
enum BondQuery {
    SingleOrAromatic,
    Order(BondOrder),
    Any,
}

struct Ctx<'a> {
    g: &'a MolGraph,
    ring: Vec<bool>,
}

impl Prim {
    fn eval(&self, ctx: &Ctx, i: usize, relaxed: bool) -> bool {
        let atom = ctx.g.atom(i);
        match *self {
            Prim::Any => true,
            Prim::Element { z, aromatic } => {
                atom.element.atomic_number() == z && aromatic.is_none_or(|a| a == atom.aromatic)
            }
            Prim::Aromatic(a) => atom.aromatic == a,
            Prim::Degree(lo, hi) => relaxed || (lo as usize..=hi as usize).contains(&ctx.g.degree(i)),
            Prim::Hydrogens(h) => relaxed || atom.explicit_h == h,
            Prim::Connectivity(x) => relaxed || ctx.g.degree(i) + atom.explicit_h as usize == x as usize,
            Prim::Ring => ctx.ring[i],
            Prim::Charge(c) => atom.formal_charge == c,
        }
    }

    /// Context-free primitives a template atom can be chosen to satisfy.
    fn is_static(&self) -> bool {
        matches!(self, Prim::Any | Prim::Element { .. } | Prim::Aromatic(_) | Prim::Charge(_))
    }
}

impl AtomQuery {
    fn eval(&self, ctx: &Ctx, i: usize, relaxed: bool) -> bool {
        self.0.iter().all(|ors| {
            ors.iter().any(|ands| {
                ands.iter().all(|lit| {
                    if relaxed && !lit.prim.is_static() && !matches!(lit.prim, Prim::Ring) {
                        return true;
                    }
                    lit.prim.eval(ctx, i, relaxed) != lit.negated
                })
            })
        })
    }

    /// Static check on a candidate (element, aromatic, charge) assignment.
    fn admits(&self, element: Element, aromatic: bool, charge: i8) -> bool {
        let eval = |p: &Prim| match *p {
            Prim::Any => true,
            Prim::Element { z, aromatic: a } => element.atomic_number() == z && a.is_none_or(|a| a == aromatic),
            Prim::Aromatic(a) => a == aromatic,
            Prim::Charge(c) => c == charge,
            _ => true,
        };
        self.0.iter().all(|ors| {
            ors.iter().any(|ands| ands.iter().all(|lit| !lit.prim.is_static() || eval(&lit.prim) != lit.negated))
        })
    }

    fn mentioned(&self) -> (Vec<(Element, Option<bool>)>, Vec<i8>, Option<u8>) {
        let mut elements = Vec::new();
        let mut charges = Vec::new();
        let mut hydrogens = None;
        for ors in &self.0 {
            for ands in ors {
                for lit in ands.iter().filter(|l| !l.negated) {
                    match lit.prim {
                        Prim::Element { z, aromatic } => {
                            elements.push((Element::from_atomic_number(z).expect("valid z"), aromatic))
                        }
                        Prim::Charge(c) => charges.push(c),
                        Prim::Hydrogens(h) if ors.len() == 1 => hydrogens = Some(h),
                        _ => {}
                    }
                }
            }
        }
        (elements, charges, hydrogens)
    }
}

impl BondQuery {
    fn matches(self, order: BondOrder) -> bool {
        match self {
            BondQuery::Any => true,
            BondQuery::SingleOrAromatic => matches!(order, BondOrder::Single | BondOrder::Aromatic),
            BondQuery::Order(o) => o == order,
        }
    }
}

/// A substructure query.
#[derive(Debug, Clone)]
pub struct Pattern {
    name: String,
    source: String,
    atoms: Vec<AtomQuery>,
    bonds: Vec<(usize, usize, BondQuery)>,
    adj: Vec<Vec<(usize, usize)>>,
    /// Pattern atoms in match order with the bond to an earlier atom used
    /// to generate candidates.
    order: Vec<(usize, Option<usize>)>,
    template: Option<MolGraph>,
}

pub const MAX_PATTERN_ATOMS: usize = 16;

impl Pattern {
    pub fn parse(name: &str, text: &str) -> Result<Pattern, PatternError> {
        let (atoms, bonds) = Parser { s: text.as_bytes(), pos: 0 }.parse()?;
        if atoms.is_empty() {
            return Err(perr(0, "empty pattern"));
        }
        if atoms.len() > MAX_PATTERN_ATOMS {
            return Err(perr(0, format!("pattern has more than {MAX_PATTERN_ATOMS} atoms")));
        }
        let mut adj = vec![Vec::new(); atoms.len()];
        for (k, &(a, b, _)) in bonds.iter().enumerate() {
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        // BFS order from atom 0; the query must be connected.
        let mut order = vec![(0, None)];
        let mut seen = vec![false; atoms.len()];
        seen[0] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head].0;
            head += 1;
            for &(u, k) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    order.push((u, Some(k)));
                }
            }
        }
        if order.len() != atoms.len() {
            return Err(perr(0, "pattern is not connected"));
        }
        let mut p = Pattern { name: name.to_string(), source: text.to_string(), atoms, bonds, adj, order, template: None };
        p.template = p.build_template().or_else(|| p.host_template());
        Ok(p)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// A concrete molecule realising the pattern, used when the pattern's
    /// group is attached to another molecule. `None` if no small assignment
    /// of elements produced a valid molecule.
    pub fn template(&self) -> Option<&MolGraph> {
        self.template.as_ref()
    }

    /// All embeddings, one per distinct matched atom set. Each mapping lists
    /// the graph atom for every pattern atom.
    pub fn matches(&self, g: &MolGraph) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        self.search(g, false, &mut |m| {
            let mut key = m.to_vec();
            key.sort_unstable();
            if seen.insert(key) {
                out.push(m.to_vec());
            }
            true
        });
        out
    }

    /// Every embedding, without collapsing automorphic duplicates.
    pub fn raw_embeddings(&self, g: &MolGraph) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.search(g, false, &mut |m| {
            out.push(m.to_vec());
            true
        });
        out
    }

    pub fn is_match(&self, g: &MolGraph) -> bool {
        let mut found = false;
        self.search(g, false, &mut |_| {
            found = true;
            false
        });
        found
    }

    fn relaxed_match(&self, g: &MolGraph) -> bool {
        let mut found = false;
        self.search(g, true, &mut |_| {
            found = true;
            false
        });
        found
    }

    /// Backtracking search; `visit` returns false to stop.
    fn search(&self, g: &MolGraph, relaxed: bool, visit: &mut dyn FnMut(&[usize]) -> bool) {
        if g.atom_count() < self.atoms.len() {
            return;
        }
        let ctx = Ctx { g, ring: g.ring_atoms() };
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut used = vec![false; g.atom_count()];
        self.extend(&ctx, relaxed, 0, &mut map, &mut used, visit);
    }

    fn extend(
        &self,
        ctx: &Ctx,
        relaxed: bool,
        depth: usize,
        map: &mut [usize],
        used: &mut [bool],
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if depth == self.order.len() {
            return visit(map);
        }
        let (p, via) = self.order[depth];
        let candidates: Vec<usize> = match via {
            None => (0..ctx.g.atom_count()).collect(),
            Some(k) => {
                let (a, b, _) = self.bonds[k];
                let anchor = if a == p { map[b] } else { map[a] };
                ctx.g.neighbors(anchor).iter().map(|&(u, _)| u).collect()
            }
        };
        for v in candidates {
            if used[v] || ctx.g.degree(v) < self.adj[p].len() || !self.atoms[p].eval(ctx, v, relaxed) {
                continue;
            }
            let bonds_ok = self.adj[p].iter().all(|&(q, k)| {
                map[q] == usize::MAX
                    || ctx.g.bond_between(v, map[q]).is_some_and(|bi| self.bonds[k].2.matches(ctx.g.bonds()[bi].order))
            });
            if !bonds_ok {
                continue;
            }
            map[p] = v;
            used[v] = true;
            let keep_going = self.extend(ctx, relaxed, depth + 1, map, used, visit);
            used[v] = false;
            map[p] = usize::MAX;
            if !keep_going {
                return false;
            }
        }
        true
    }

    fn build_template(&self) -> Option<MolGraph> {
        const DEFAULTS: [Element; 10] = [
            Element::C,
            Element::N,
            Element::O,
            Element::S,
            Element::F,
            Element::CL,
            Element::BR,
            Element::I,
            Element::P,
            Element::B,
        ];
        let mut options: Vec<Vec<PendingAtom>> = Vec::new();
        for q in &self.atoms {
            let (elements, charges, hydrogens) = q.mentioned();
            let mut pool: Vec<(Element, Option<bool>)> = elements;
            pool.extend(DEFAULTS.iter().map(|&e| (e, None)));
            let mut charge_pool = charges;
            charge_pool.extend([0, 1, -1]);
            let mut opts = Vec::new();
            for &(e, arom) in &pool {
                for aromatic in arom.map_or(vec![false, true], |a| vec![a]) {
                    if aromatic && !e.can_be_aromatic() {
                        continue;
                    }
                    for &c in &charge_pool {
                        let cand = PendingAtom {
                            element: e,
                            formal_charge: c,
                            hydrogens: if aromatic { hydrogens } else { None },
                            aromatic,
                        };
                        if q.admits(e, aromatic, c) && !opts.contains(&cand) {
                            opts.push(cand);
                        }
                    }
                }
            }
            if opts.is_empty() {
                return None;
            }
            opts.truncate(6);
            options.push(opts);
        }
        let mut choice = vec![0usize; self.atoms.len()];
        for _ in 0..2000 {
            if let Some(g) = self.try_template(&options, &choice) {
                return Some(g);
            }
            // Odometer, last atom fastest.
            let mut k = choice.len();
            loop {
                if k == 0 {
                    return None;
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    break;
                }
                choice[k] = 0;
            }
        }
        None
    }

    /// Fallback for fragments that cannot stand alone (partial aromatic
    /// rings, ring-membership queries): the first small host molecule the
    /// pattern matches.
    fn host_template(&self) -> Option<MolGraph> {
        const HOSTS: [&str; 16] = [
            "c1ccccc1",
            "Oc1ccccc1",
            "Nc1ccccc1",
            "Cc1ccccc1",
            "Fc1ccccc1",
            "c1ccncc1",
            "c1cncnc1",
            "c1ccc(cc1)-c1ccccc1",
            "C1CCCCC1",
            "O=C1CCCCC1",
            "C1CCNCC1",
            "C1CCOCC1",
            "CC1(C)CCCCC1",
            "c1ccc2ccccc2c1",
            "c1cc[nH]c1",
            "c1ccsc1",
        ];
        HOSTS.iter().filter_map(|s| parse_smiles(s).ok()).find(|g| self.is_match(g))
    }

    fn try_template(&self, options: &[Vec<PendingAtom>], choice: &[usize]) -> Option<MolGraph> {
        let mut b = MolBuilder::new();
        for (k, opts) in options.iter().enumerate() {
            b.add_atom(opts[choice[k]]);
        }
        for &(x, y, q) in &self.bonds {
            let both_aromatic = options[x][choice[x]].aromatic && options[y][choice[y]].aromatic;
            let order = match q {
                BondQuery::Order(o) => o,
                _ if both_aromatic => BondOrder::Aromatic,
                _ => BondOrder::Single,
            };
            if order == BondOrder::Aromatic && !both_aromatic {
                return None;
            }
            b.add_bond(x, y, order).ok()?;
        }
        let g = b.build().ok()?;
        self.relaxed_match(&g).then_some(g)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.source)
    }
}

// ---------------------------------------------------------------------------

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

type Parsed = (Vec<AtomQuery>, Vec<(usize, usize, BondQuery)>);

impl<'a> Parser<'a> {
    fn parse(mut self) -> Result<Parsed, PatternError> {
        let mut atoms: Vec<AtomQuery> = Vec::new();
        let mut bonds: Vec<(usize, usize, BondQuery)> = Vec::new();
        let mut prev: Option<usize> = None;
        let mut pending: Option<BondQuery> = None;
        let mut stack: Vec<usize> = Vec::new();
        let mut rings: std::collections::HashMap<u8, (usize, Option<BondQuery>)> = Default::default();
        let connect = |bonds: &mut Vec<(usize, usize, BondQuery)>, a: usize, b: usize, q: BondQuery, at: usize| {
            if bonds.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                return Err(perr(at, "duplicate bond"));
            }
            bonds.push((a, b, q));
            Ok(())
        };
        while self.pos < self.s.len() {
            let at = self.pos;
            let c = self.s[self.pos];
            match c {
                b'(' => {
                    stack.push(prev.ok_or_else(|| perr(at, "branch without atom"))?);
                    self.pos += 1;
                }
                b')' => {
                    prev = Some(stack.pop().ok_or_else(|| perr(at, "unmatched `)`"))?);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'~' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(perr(at, "misplaced bond"));
                    }
                    pending = Some(match c {
                        b'-' => BondQuery::Order(BondOrder::Single),
                        b'=' => BondQuery::Order(BondOrder::Double),
                        b'#' => BondQuery::Order(BondOrder::Triple),
                        b':' => BondQuery::Order(BondOrder::Aromatic),
                        _ => BondQuery::Any,
                    });
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let p = prev.ok_or_else(|| perr(at, "ring bond without atom"))?;
                    let d = c - b'0';
                    self.pos += 1;
                    let q = pending.take();
                    match rings.remove(&d) {
                        Some((other, q0)) => {
                            connect(&mut bonds, other, p, q.or(q0).unwrap_or(BondQuery::SingleOrAromatic), at)?
                        }
                        None => {
                            rings.insert(d, (p, q));
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    atoms.push(atom);
                    let idx = atoms.len() - 1;
                    if let Some(p) = prev {
                        connect(&mut bonds, p, idx, pending.take().unwrap_or(BondQuery::SingleOrAromatic), at)?;
                    }
                    prev = Some(idx);
                }
            }
        }
        if pending.is_some() || !stack.is_empty() || !rings.is_empty() {
            return Err(perr(self.s.len(), "incomplete pattern"));
        }
        Ok((atoms, bonds))
    }

    fn atom(&mut self) -> Result<AtomQuery, PatternError> {
        let at = self.pos;
        if self.s[self.pos] == b'[' {
            let end = self.s[at..].iter().position(|&b| b == b']').map(|k| at + k).ok_or_else(|| perr(at, "unclosed `[`"))?;
            let inner = &self.s[at + 1..end];
            self.pos = end + 1;
            return parse_expression(inner, at + 1);
        }
        let rest = &self.s[self.pos..];
        let (sym, len) = if rest.starts_with(b"Cl") {
            ("Cl", 2)
        } else if rest.starts_with(b"Br") {
            ("Br", 2)
        } else {
            let s = match rest[0] {
                b'B' => "B",
                b'C' => "C",
                b'N' => "N",
                b'O' => "O",
                b'P' => "P",
                b'S' => "S",
                b'F' => "F",
                b'I' => "I",
                b'b' => "b",
                b'c' => "c",
                b'n' => "n",
                b'o' => "o",
                b'p' => "p",
                b's' => "s",
                b'*' => "*",
                b'a' => "a",
                b'A' => "A",
                other => return Err(perr(at, format!("unexpected `{}`", other as char))),
            };
            (s, 1)
        };
        self.pos += len;
        parse_expression(sym.as_bytes(), at)
    }
}

fn parse_expression(s: &[u8], offset: usize) -> Result<AtomQuery, PatternError> {
    let text = std::str::from_utf8(s).map_err(|_| perr(offset, "invalid UTF-8"))?;
    if text.is_empty() {
        return Err(perr(offset, "empty atom expression"));
    }
    let mut clauses = Vec::new();
    for clause in text.split(';') {
        let mut ors = Vec::new();
        for alt in clause.split(',') {
            ors.push(parse_conjunction(alt.as_bytes(), offset)?);
        }
        clauses.push(ors);
    }
    Ok(AtomQuery(clauses))
}

fn parse_number(s: &[u8], pos: &mut usize) -> Option<u8> {
    let start = *pos;
    while *pos < s.len() && s[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&s[start..*pos]).ok()?.parse().ok()
}

fn parse_conjunction(s: &[u8], offset: usize) -> Result<Vec<Literal>, PatternError> {
    let mut out = Vec::new();
    let mut pos = 0;
    if s.is_empty() {
        return Err(perr(offset, "empty primitive list"));
    }
    while pos < s.len() {
        if s[pos] == b'&' {
            pos += 1;
            continue;
        }
        let mut negated = false;
        while pos < s.len() && s[pos] == b'!' {
            negated = !negated;
            pos += 1;
        }
        if pos >= s.len() {
            return Err(perr(offset + pos, "dangling `!`"));
        }
        let c = s[pos];
        let prim = match c {
            b'*' => {
                pos += 1;
                Prim::Any
            }
            b'#' => {
                pos += 1;
                let z = parse_number(s, &mut pos).ok_or_else(|| perr(offset + pos, "`#` needs a number"))?;
                Element::from_atomic_number(z).ok_or_else(|| perr(offset + pos, "bad atomic number"))?;
                Prim::Element { z, aromatic: None }
            }
            b'a' => {
                pos += 1;
                Prim::Aromatic(true)
            }
            b'A' if s.get(pos + 1).is_none_or(|b| !b.is_ascii_lowercase()) => {
                pos += 1;
                Prim::Aromatic(false)
            }
            b'D' if s.get(pos + 1).is_some_and(u8::is_ascii_digit) => {
                pos += 1;
                let lo = parse_number(s, &mut pos).expect("digit present");
                let hi = if s.get(pos) == Some(&b'-') && s.get(pos + 1).is_some_and(u8::is_ascii_digit) {
                    pos += 1;
                    parse_number(s, &mut pos).expect("digit present")
                } else {
                    lo
                };
                Prim::Degree(lo, hi)
            }
            b'X' if s.get(pos + 1).is_some_and(u8::is_ascii_digit) => {
                pos += 1;
                Prim::Connectivity(parse_number(s, &mut pos).expect("digit present"))
            }
            b'H' if s.get(pos + 1).is_none_or(|b| !b.is_ascii_lowercase()) => {
                pos += 1;
                Prim::Hydrogens(if s.get(pos).is_some_and(u8::is_ascii_digit) {
                    parse_number(s, &mut pos).expect("digit present")
                } else {
                    1
                })
            }
            b'R' if s.get(pos + 1).is_none_or(|b| !b.is_ascii_lowercase()) => {
                pos += 1;
                Prim::Ring
            }
            b'+' | b'-' => {
                pos += 1;
                let sign: i8 = if c == b'+' { 1 } else { -1 };
                if s.get(pos).is_some_and(u8::is_ascii_digit) {
                    let n = parse_number(s, &mut pos).expect("digit present");
                    Prim::Charge(sign * n as i8)
                } else {
                    let mut n = 1;
                    while s.get(pos) == Some(&c) {
                        n += 1;
                        pos += 1;
                    }
                    Prim::Charge(sign * n)
                }
            }
            b'A'..=b'Z' => {
                let mut len = 1;
                if s.get(pos + 1).is_some_and(u8::is_ascii_lowercase) {
                    let two = std::str::from_utf8(&s[pos..pos + 2]).expect("ascii");
                    if Element::from_symbol(two).is_some() {
                        len = 2;
                    }
                }
                let sym = std::str::from_utf8(&s[pos..pos + len]).expect("ascii");
                let e = Element::from_symbol(sym).ok_or_else(|| perr(offset + pos, format!("unknown element `{sym}`")))?;
                pos += len;
                Prim::Element { z: e.atomic_number(), aromatic: Some(false) }
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                let upper = (c as char).to_ascii_uppercase().to_string();
                let e = Element::from_symbol(&upper).expect("organic aromatic");
                pos += 1;
                Prim::Element { z: e.atomic_number(), aromatic: Some(true) }
            }
            other => return Err(perr(offset + pos, format!("unexpected `{}`", other as char))),
        };
        out.push(Literal { negated, prim });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn count(p: &str, s: &str) -> usize {
        Pattern::parse("t", p).unwrap().matches(&parse_smiles(s).unwrap()).len()
    }

    #[test]
    fn basic_matches() {
        assert_eq!(count("[OX2H1]", "CCO"), 1);
        assert_eq!(count("C=O", "CCCCCC"), 0);
        assert_eq!(count("c1ccccc1", "c1ccccc1"), 1);
        assert_eq!(Pattern::parse("t", "c1ccccc1").unwrap().raw_embeddings(&parse_smiles("c1ccccc1").unwrap()).len(), 12);
        assert_eq!(count("[CH3]", "CC(C)C"), 3);
        assert_eq!(count("C=O", "CC(=O)O"), 1);
        assert_eq!(count("c[OH1]", "Oc1ccccc1"), 1);
        assert_eq!(count("[#7]", "c1ccncc1N"), 2);
        assert_eq!(count("[N;R]", "C1CCNCC1"), 1);
        assert_eq!(count("[N;!R]", "C1CCNCC1"), 0);
        assert_eq!(count("[D1-2;C]", "CC(C)C"), 3);
        assert_eq!(count("[+,-]", "[O-][N+](=O)C"), 2);
        assert_eq!(count("a-a", "c1ccccc1-c1ccccc1"), 1);
        assert_eq!(count("a-a", "c1ccc2ccccc2c1"), 0);
        assert_eq!(count("C~O", "C=O"), 1);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "C(", "C1CC", "[Xx]", "C==C", "[C", "C.C"] {
            assert!(Pattern::parse("t", bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn templates_realise_their_pattern() {
        for p in ["c1ccccc1", "a1aaaa1", "C(=O)[OH1]", "[N+](=O)[O-]", "[nH]1cccc1", "[CH3]", "*1**1", "C#N"] {
            let pat = Pattern::parse("t", p).unwrap();
            let t = pat.template().unwrap_or_else(|| panic!("no template for {p}"));
            t.validate().unwrap();
            assert!(pat.relaxed_match(t), "{p}");
        }
    }
}

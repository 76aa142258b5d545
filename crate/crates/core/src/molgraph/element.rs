use std::fmt;

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// A chemical element, stored by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    /// Case-sensitive lookup of a standard element symbol.
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|s| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    /// Elements that may be written without brackets in SMILES.
    pub fn is_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that may appear as lowercase aromatic atoms.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34 | 14 | 52)
    }

    fn period(z: u8) -> u8 {
        match z {
            1..=2 => 1,
            3..=10 => 2,
            11..=18 => 3,
            19..=36 => 4,
            37..=54 => 5,
            55..=86 => 6,
            _ => 7,
        }
    }

    fn neutral_valences(z: u8) -> Option<&'static [u8]> {
        Some(match z {
            1 => &[1],
            5 => &[3],
            6 => &[4],
            7 => &[3],
            8 => &[2],
            9 | 17 | 35 | 53 => &[1],
            14 => &[4],
            15 => &[3, 5],
            16 => &[2, 4, 6],
            33 => &[3, 5],
            34 => &[2, 4, 6],
            _ => return None,
        })
    }

    /// Allowed total valences (bond orders plus hydrogens) for the given
    /// formal charge, or `None` when the element carries no valence model.
    ///
    /// Charged atoms take the valences of the isoelectronic neutral element
    /// in the same period (N+ behaves like C, O- like F, ...).
    pub fn valences(self, charge: i8) -> Option<Vec<u8>> {
        let z = self.0;
        let base = Self::neutral_valences(z)?;
        if charge == 0 {
            return Some(base.to_vec());
        }
        let shifted = z as i16 - charge as i16;
        if (1..=118).contains(&shifted) {
            let zs = shifted as u8;
            if Self::period(zs) == Self::period(z) {
                if let Some(v) = Self::neutral_valences(zs) {
                    return Some(v.to_vec());
                }
            }
        }
        let delta = charge.unsigned_abs();
        let v: Vec<u8> = base.iter().filter(|&&v| v >= delta).map(|&v| v - delta).collect();
        Some(if v.is_empty() { vec![0] } else { v })
    }

    pub fn max_valence(self, charge: i8) -> Option<u8> {
        self.valences(charge).and_then(|v| v.into_iter().max())
    }

    /// Smallest allowed valence that is at least `used`.
    pub fn target_valence(self, charge: i8, used: u8) -> Option<u8> {
        self.valences(charge)?.into_iter().filter(|&v| v >= used).min()
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_lookup_round_trips() {
        for z in 1..=118u8 {
            let e = Element::from_atomic_number(z).unwrap();
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
        assert_eq!(Element::from_symbol("Uue"), None);
        assert_eq!(Element::from_symbol("cl"), None);
    }

    #[test]
    fn charged_valences_follow_isoelectronic_neighbour() {
        assert_eq!(Element::N.valences(1), Some(vec![4]));
        assert_eq!(Element::O.valences(-1), Some(vec![1]));
        assert_eq!(Element::C.valences(-1), Some(vec![3]));
        assert_eq!(Element::S.valences(1), Some(vec![3, 5]));
        assert_eq!(Element::S.valences(0), Some(vec![2, 4, 6]));
        assert_eq!(Element::from_symbol("Na").unwrap().valences(1), None);
    }

    #[test]
    fn target_valence_picks_lowest_fit() {
        assert_eq!(Element::S.target_valence(0, 3), Some(4));
        assert_eq!(Element::C.target_valence(0, 5), None);
        assert_eq!(Element::P.target_valence(0, 0), Some(3));
    }
}

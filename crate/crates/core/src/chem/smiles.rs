//! Parser for a practical SMILES subset: organic-subset atoms, bracket
//! atoms with isotope/H-count/charge, bonds `- = # :`, branches, ring
//! closures (`0`-`9` and `%nn`), aromatic lowercase atoms, and `.`
//! separated components. Stereo markers (`/`, `\`, `@`) are parsed and
//! discarded.

use crate::error::{Error, Result};

#[rustfmt::skip]
const SYMBOLS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga",
    "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd",
    "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm",
    "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os",
    "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
];

/// Chemical element, stored as its atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Element(pub u8);

impl Element {
    pub fn from_symbol(sym: &str) -> Option<Self> {
        SYMBOLS
            .iter()
            .position(|&s| s == sym)
            .map(|i| Element((i + 1) as u8))
    }

    pub fn symbol(&self) -> &'static str {
        SYMBOLS[(self.0 - 1) as usize]
    }

    pub fn atomic_number(&self) -> u8 {
        self.0
    }
}

pub const B: Element = Element(5);
pub const C: Element = Element(6);
pub const N: Element = Element(7);
pub const O: Element = Element(8);
pub const P: Element = Element(15);
pub const S: Element = Element(16);

/// Standard valences used for implicit hydrogen computation on
/// organic-subset atoms.
fn standard_valences(e: Element) -> &'static [u8] {
    match e.0 {
        5 => &[3],        // B
        6 => &[4],        // C
        7 => &[3, 5],     // N
        8 => &[2],        // O
        15 => &[3, 5],    // P
        16 => &[2, 4, 6], // S
        9 | 17 | 35 | 53 => &[1], // halogens
        _ => &[],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer code used by fingerprint hashing.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Hydrogen count: explicit for bracket atoms, computed by
    /// standard valence for organic-subset atoms.
    pub h_count: u8,
    pub aromatic: bool,
    pub in_ring: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Per atom: (neighbor atom, bond index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = (usize, &Bond)> {
        self.adjacency[atom].iter().map(move |&(n, b)| (n, &self.bonds[b]))
    }
}

fn err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Smiles { offset, msg: msg.into() }
}

struct PendingAtom {
    element: Element,
    aromatic: bool,
    charge: i8,
    explicit_h: Option<u8>,
    bracket: bool,
    offset: usize,
}

struct RingOpening {
    atom: usize,
    bond: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text_len: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<(usize, usize, Option<BondOrder>, usize)>,
    prev: Option<usize>,
    branch_stack: Vec<(Option<usize>, usize)>,
    pending_bond: Option<(BondOrder, usize)>,
    ring_openings: std::collections::HashMap<u32, RingOpening>,
    _source: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.char_indices().collect(),
            pos: 0,
            text_len: text.len(),
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            branch_stack: Vec::new(),
            pending_bond: None,
            ring_openings: std::collections::HashMap::new(),
            _source: text,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.text_len, |&(o, _)| o)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn push_atom(&mut self, atom: PendingAtom) -> Result<()> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let (order, boffset) = match self.pending_bond.take() {
                Some((o, off)) => (Some(o), off),
                None => (None, self.atoms[idx].offset),
            };
            self.bonds.push((prev, idx, order, boffset));
        } else if let Some((order, off)) = self.pending_bond.take() {
            let _ = order;
            return Err(err(off, "bond symbol without a preceding atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn handle_ring_digit(&mut self, digit: u32, offset: usize) -> Result<()> {
        let Some(atom) = self.prev else {
            return Err(err(offset, "ring closure before any atom"));
        };
        let bond = self.pending_bond.take().map(|(o, _)| o);
        if let Some(open) = self.ring_openings.remove(&digit) {
            if open.atom == atom {
                return Err(err(offset, "ring closure bonds an atom to itself"));
            }
            let order = match (open.bond, bond) {
                (Some(a), Some(b)) if a != b => {
                    return Err(err(offset, "ring closure bond symbols disagree"));
                }
                (Some(a), _) => Some(a),
                (_, b) => b,
            };
            self.bonds.push((open.atom, atom, order, offset));
        } else {
            self.ring_openings.insert(digit, RingOpening { atom, bond, offset });
        }
        Ok(())
    }

    fn parse_bracket(&mut self, open_offset: usize) -> Result<PendingAtom> {
        // isotope
        let mut saw_isotope = false;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            saw_isotope = true;
            self.bump();
        }
        let _ = saw_isotope; // isotopes are parsed and discarded

        let sym_offset = self.offset();
        let first = self
            .bump()
            .ok_or_else(|| err(self.text_len, "unterminated bracket atom"))?;
        if !first.is_ascii_alphabetic() && first != '*' {
            return Err(err(sym_offset, format!("expected element symbol, found '{first}'")));
        }
        let mut sym = String::new();
        sym.push(first);
        // Two-letter symbols: second letter is lowercase and the pair
        // must name an element ("Cl", "Br", "Se", ...); a lone
        // lowercase letter is an aromatic atom.
        if let Some(next) = self.peek() {
            if next.is_ascii_lowercase() {
                let candidate = {
                    let mut s = String::new();
                    s.push(first.to_ascii_uppercase());
                    s.push(next);
                    s
                };
                if Element::from_symbol(&candidate).is_some() && first.is_ascii_uppercase() {
                    sym.push(next);
                    self.bump();
                } else if first.is_ascii_lowercase() && Element::from_symbol(&candidate).is_some() {
                    // aromatic two-letter, e.g. [se]
                    sym.push(next);
                    self.bump();
                }
            }
        }
        let aromatic = sym.chars().next().unwrap().is_ascii_lowercase();
        let lookup = if aromatic {
            let mut s = String::new();
            let mut it = sym.chars();
            s.push(it.next().unwrap().to_ascii_uppercase());
            s.extend(it);
            s
        } else {
            sym.clone()
        };
        let element = Element::from_symbol(&lookup)
            .ok_or_else(|| err(sym_offset, format!("unknown element '{sym}'")))?;

        let mut charge: i32 = 0;
        let mut explicit_h: u8 = 0;
        loop {
            let offset = self.offset();
            match self.peek() {
                Some(']') => {
                    self.bump();
                    break;
                }
                Some('@') => {
                    // chirality, discarded
                    self.bump();
                    if self.peek() == Some('@') {
                        self.bump();
                    }
                }
                Some('H') => {
                    self.bump();
                    let mut n = 0u32;
                    let mut saw_digit = false;
                    while let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                        saw_digit = true;
                        n = n * 10 + d;
                        self.bump();
                    }
                    explicit_h = if saw_digit { n as u8 } else { 1 };
                }
                Some(sign @ ('+' | '-')) => {
                    self.bump();
                    let unit: i32 = if sign == '+' { 1 } else { -1 };
                    let mut magnitude = 1i32;
                    if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                        self.bump();
                        magnitude = d as i32;
                    } else {
                        while self.peek() == Some(sign) {
                            self.bump();
                            magnitude += 1;
                        }
                    }
                    charge = unit * magnitude;
                }
                Some(':') => {
                    // atom class, discarded
                    self.bump();
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                }
                Some(other) => {
                    return Err(err(offset, format!("unexpected '{other}' in bracket atom")));
                }
                None => return Err(err(self.text_len, "unterminated bracket atom")),
            }
        }
        if !(-15..=15).contains(&charge) {
            return Err(err(open_offset, "unreasonable formal charge"));
        }
        Ok(PendingAtom {
            element,
            aromatic,
            charge: charge as i8,
            explicit_h: Some(explicit_h),
            bracket: true,
            offset: open_offset,
        })
    }

    fn parse(mut self) -> Result<Molecule> {
        while let Some(c) = self.peek() {
            let offset = self.offset();
            match c {
                '[' => {
                    self.bump();
                    let atom = self.parse_bracket(offset)?;
                    self.push_atom(atom)?;
                }
                'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => {
                    self.bump();
                    let mut sym = String::new();
                    sym.push(c);
                    if (c == 'C' && self.peek() == Some('l'))
                        || (c == 'B' && self.peek() == Some('r'))
                    {
                        sym.push(self.bump().unwrap());
                    }
                    let element = Element::from_symbol(&sym).expect("organic subset symbol");
                    self.push_atom(PendingAtom {
                        element,
                        aromatic: false,
                        charge: 0,
                        explicit_h: None,
                        bracket: false,
                        offset,
                    })?;
                }
                'b' | 'c' | 'n' | 'o' | 'p' | 's' => {
                    self.bump();
                    let sym = c.to_ascii_uppercase().to_string();
                    let element = Element::from_symbol(&sym).expect("organic subset symbol");
                    self.push_atom(PendingAtom {
                        element,
                        aromatic: true,
                        charge: 0,
                        explicit_h: None,
                        bracket: false,
                        offset,
                    })?;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    self.bump();
                    let order = match c {
                        '=' => BondOrder::Double,
                        '#' => BondOrder::Triple,
                        ':' => BondOrder::Aromatic,
                        // '-', '/' and '\' are single; stereo direction
                        // is discarded.
                        _ => BondOrder::Single,
                    };
                    if self.pending_bond.is_some() {
                        return Err(err(offset, "two consecutive bond symbols"));
                    }
                    self.pending_bond = Some((order, offset));
                }
                '(' => {
                    self.bump();
                    if self.prev.is_none() {
                        return Err(err(offset, "branch before any atom"));
                    }
                    self.branch_stack.push((self.prev, offset));
                }
                ')' => {
                    self.bump();
                    let Some((prev, _)) = self.branch_stack.pop() else {
                        return Err(err(offset, "unbalanced ')'"));
                    };
                    self.prev = prev;
                }
                '%' => {
                    self.bump();
                    let d1 = self
                        .bump()
                        .and_then(|c| c.to_digit(10))
                        .ok_or_else(|| err(offset, "'%' must be followed by two digits"))?;
                    let d2 = self
                        .bump()
                        .and_then(|c| c.to_digit(10))
                        .ok_or_else(|| err(offset, "'%' must be followed by two digits"))?;
                    self.handle_ring_digit(d1 * 10 + d2, offset)?;
                }
                '0'..='9' => {
                    self.bump();
                    self.handle_ring_digit(c.to_digit(10).unwrap(), offset)?;
                }
                '.' => {
                    self.bump();
                    if self.pending_bond.is_some() {
                        return Err(err(offset, "bond symbol before '.'"));
                    }
                    self.prev = None;
                }
                other => {
                    return Err(err(offset, format!("unexpected character '{other}'")));
                }
            }
        }

        if let Some((_, open_offset)) = self.branch_stack.last() {
            let _ = open_offset;
            // Report at end of input, where the missing ')' was expected.
            return Err(err(self.text_len, "unbalanced '(': branch never closed"));
        }
        if let Some(open) = self.ring_openings.values().min_by_key(|o| o.offset) {
            return Err(err(open.offset, "unpaired ring-closure digit"));
        }
        if let Some((_, off)) = self.pending_bond {
            return Err(err(off, "dangling bond at end of input"));
        }
        if self.atoms.is_empty() {
            return Err(err(0, "empty SMILES"));
        }

        finish(self.atoms, self.bonds)
    }
}

/// Resolve implicit bond orders, compute implicit hydrogens, and mark
/// ring membership.
fn finish(
    pending: Vec<PendingAtom>,
    raw_bonds: Vec<(usize, usize, Option<BondOrder>, usize)>,
) -> Result<Molecule> {
    let mut bonds = Vec::with_capacity(raw_bonds.len());
    for (a, b, order, offset) in raw_bonds {
        if a == b {
            return Err(err(offset, "self-bond"));
        }
        let aromatic_pair = pending[a].aromatic && pending[b].aromatic;
        let order = match order {
            Some(BondOrder::Aromatic) if !aromatic_pair => {
                return Err(err(offset, "aromatic bond between non-aromatic atoms"));
            }
            Some(o) => o,
            None if aromatic_pair => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        bonds.push(Bond { a, b, order });
    }

    let mut adjacency = vec![Vec::new(); pending.len()];
    for (i, bond) in bonds.iter().enumerate() {
        adjacency[bond.a].push((bond.b, i));
        adjacency[bond.b].push((bond.a, i));
    }

    let ring_bonds = find_ring_bonds(pending.len(), &bonds, &adjacency);
    let mut in_ring = vec![false; pending.len()];
    for (i, bond) in bonds.iter().enumerate() {
        if ring_bonds[i] {
            in_ring[bond.a] = true;
            in_ring[bond.b] = true;
        }
    }

    let mut atoms = Vec::with_capacity(pending.len());
    for (i, p) in pending.iter().enumerate() {
        let h_count = match p.explicit_h {
            Some(h) => h,
            None => implicit_hydrogens(p, i, &bonds, &adjacency)?,
        };
        atoms.push(Atom {
            element: p.element,
            charge: p.charge,
            h_count,
            aromatic: p.aromatic,
            in_ring: in_ring[i],
        });
    }

    Ok(Molecule { atoms, bonds, adjacency })
}

fn implicit_hydrogens(
    atom: &PendingAtom,
    idx: usize,
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> Result<u8> {
    debug_assert!(!atom.bracket);
    let mut order_sum: u32 = 0;
    let mut aromatic_bonds = 0u32;
    for &(_, b) in &adjacency[idx] {
        match bonds[b].order {
            BondOrder::Single => order_sum += 1,
            BondOrder::Double => order_sum += 2,
            BondOrder::Triple => order_sum += 3,
            BondOrder::Aromatic => {
                order_sum += 1;
                aromatic_bonds += 1;
            }
        }
    }
    // An aromatic C/N/P/B contributes one pi bond to the ring system;
    // aromatic O and S donate a lone pair instead.
    if atom.aromatic && aromatic_bonds > 0 && matches!(atom.element, C | N | P | B) {
        order_sum += 1;
    }
    let valences = standard_valences(atom.element);
    debug_assert!(!valences.is_empty(), "organic subset only");
    for &v in valences {
        if u32::from(v) >= order_sum {
            return Ok((u32::from(v) - order_sum) as u8);
        }
    }
    Err(err(
        atom.offset,
        format!(
            "valence overflow: {} has bond order sum {}",
            atom.element.symbol(),
            order_sum
        ),
    ))
}

/// Ring bonds are exactly the non-bridge edges; iterative Tarjan
/// bridge-finding keeps long chains off the call stack.
fn find_ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut is_bridge = vec![false; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;

    // Stack entries: (node, parent bond, next adjacency cursor).
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        stack.push((start, usize::MAX, 0));
        while let Some(&mut (u, parent_bond, ref mut cursor)) = stack.last_mut() {
            if *cursor < adjacency[u].len() {
                let (v, b) = adjacency[u][*cursor];
                *cursor += 1;
                if b == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, b, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|&b| !b).collect()
}

pub fn parse_smiles(text: &str) -> Result<Molecule> {
    Parser::new(text).parse()
}

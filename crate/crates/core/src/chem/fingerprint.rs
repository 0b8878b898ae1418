//! Morgan (ECFP-style) circular fingerprints.
//!
//! Atom identifiers start from a hash of local invariants and are
//! refined once per radius level by hashing the sorted (bond order,
//! neighbor identifier) list. Every identifier from every level is
//! folded into the bit vector by `id mod width`. The hash is a fixed
//! 64-bit FNV-1a with a hardcoded basis, never a process-randomized
//! one: reproducible features are part of the model contract.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::warn;

use crate::chem::smiles::{parse_smiles, Molecule};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn hash_fields(fields: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for f in fields {
        for b in f.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Fixed-width bit vector; width must be a power of two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    width: usize,
    radius: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    fn new(width: usize, radius: usize) -> Self {
        Self { width, radius, words: vec![0; width / 64 + usize::from(width % 64 != 0)] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn fold(&mut self, id: u64) {
        let bit = (id % self.width as u64) as usize;
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Indices of set bits, ascending.
    pub fn on_bits(&self) -> Vec<usize> {
        (0..self.width).filter(|&i| self.bit(i)).collect()
    }

    /// 0/1 row for feature matrices.
    pub fn to_f64_row(&self) -> Vec<f64> {
        (0..self.width).map(|i| if self.bit(i) { 1.0 } else { 0.0 }).collect()
    }

    /// Hex packing, most significant nibble first, for compact CSV export.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.width / 4);
        let mut nibble = 0u8;
        for i in 0..self.width {
            nibble = (nibble << 1) | u8::from(self.bit(i));
            if i % 4 == 3 {
                out.push(char::from_digit(u32::from(nibble), 16).unwrap());
                nibble = 0;
            }
        }
        out
    }
}

fn check_width(width: usize) -> Result<()> {
    if width == 0 || !width.is_power_of_two() {
        return Err(Error::Config(format!("fingerprint width {width} is not a power of two")));
    }
    Ok(())
}

/// Per-atom identifiers at every radius level, level 0 first. An atom
/// with no neighbors keeps its identifier across levels: its
/// environment never grows.
pub fn atom_identifiers(mol: &Molecule, radius: usize) -> Vec<Vec<u64>> {
    let n = mol.atom_count();
    let mut current: Vec<u64> = (0..n)
        .map(|i| {
            let a = &mol.atoms[i];
            hash_fields(&[
                u64::from(a.element.atomic_number()),
                mol.degree(i) as u64,
                u64::from(a.h_count),
                (i64::from(a.charge) + 128) as u64,
                u64::from(a.in_ring),
                u64::from(a.aromatic),
            ])
        })
        .collect();
    let mut levels = vec![current.clone()];

    for r in 1..=radius {
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            if mol.degree(i) == 0 {
                next.push(current[i]);
                continue;
            }
            let mut neighbor_ids: Vec<(u64, u64)> = mol
                .neighbors(i)
                .map(|(j, bond)| (u64::from(bond.order.code()), current[j]))
                .collect();
            neighbor_ids.sort_unstable();
            let mut fields = vec![r as u64, current[i]];
            for (order, id) in neighbor_ids {
                fields.push(order);
                fields.push(id);
            }
            next.push(hash_fields(&fields));
        }
        levels.push(next.clone());
        current = next;
    }
    levels
}

pub fn morgan_fingerprint(mol: &Molecule, radius: usize, width: usize) -> Result<Fingerprint> {
    check_width(width)?;
    let mut fp = Fingerprint::new(width, radius);
    for level in atom_identifiers(mol, radius) {
        for id in level {
            fp.fold(id);
        }
    }
    Ok(fp)
}

/// Id-keyed fingerprint rows computed from a `drug_id<TAB>smiles` file.
#[derive(Debug, Clone)]
pub struct FingerprintTable {
    pub ids: Vec<String>,
    pub matrix: DenseMatrix<f64>,
    pub width: usize,
    pub radius: usize,
}

impl FingerprintTable {
    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

pub fn fingerprint_matrix(path: &Path, width: usize, radius: usize, strict: bool) -> Result<FingerprintTable> {
    let file = File::open(path)?;
    fingerprint_matrix_from_reader(
        BufReader::new(file),
        &path.display().to_string(),
        width,
        radius,
        strict,
    )
}

pub fn fingerprint_matrix_from_reader(
    reader: impl Read,
    source_name: &str,
    width: usize,
    radius: usize,
    strict: bool,
) -> Result<FingerprintTable> {
    check_width(width)?;
    let reader = BufReader::new(reader);
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((id, smiles)) = trimmed.split_once('\t') else {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line: line_no,
                msg: "expected 'id<TAB>smiles'".into(),
            });
        };
        if index.contains_key(id) {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line: line_no,
                msg: format!("duplicate drug id '{id}'"),
            });
        }
        let row = match parse_smiles(smiles.trim()) {
            Ok(mol) => morgan_fingerprint(&mol, radius, width)?.to_f64_row(),
            Err(e) if strict => {
                return Err(Error::Parse {
                    path: source_name.to_string(),
                    line: line_no,
                    msg: format!("'{id}': {e}"),
                });
            }
            Err(e) => {
                warn!("{source_name}:{line_no}: '{id}' unparseable ({e}); zero feature row");
                vec![0.0; width]
            }
        };
        index.insert(id.to_string(), ids.len());
        ids.push(id.to_string());
        rows.push(row);
    }

    let matrix = DenseMatrix::from_rows(&rows)?;
    let matrix = if matrix.rows() == 0 {
        DenseMatrix::zeros(0, width)
    } else {
        matrix
    };
    Ok(FingerprintTable { ids, matrix, width, radius })
}

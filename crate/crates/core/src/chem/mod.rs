//! SMILES parsing and Morgan fingerprints for drug node features and
//! decoder augmentation.

pub mod fingerprint;
pub mod smiles;

pub use fingerprint::{
    atom_identifiers, fingerprint_matrix, fingerprint_matrix_from_reader, morgan_fingerprint,
    Fingerprint, FingerprintTable,
};
pub use smiles::{parse_smiles, Atom, Bond, BondOrder, Element, Molecule};

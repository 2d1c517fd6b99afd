//! Amino-acid, atom-name and token vocabularies.
//!
//! Residue tokens (`R = 33`): the 20 canonical amino acids in alphabetical
//! three-letter order, `UNK` (20), the decoder mask token (21), and 11
//! reserved special tokens (22..=32).
//!
//! Atom types (`A = 37`): the 36 heavy-atom names that occur in the 20
//! canonical residues, plus a catch-all `UNK` atom type (36). `OXT` and any
//! other non-roster name map to the catch-all.

use serde::{Deserialize, Serialize};
use std::fmt;

pub const NUM_CANONICAL: usize = 20;
pub const RESIDUE_VOCAB: usize = 33;
pub const UNK_TOKEN: usize = 20;
pub const MASK_TOKEN: usize = 21;

pub const ATOM_VOCAB: usize = 37;
pub const UNK_ATOM: usize = 36;

/// Heavy-atom names of the canonical residues; index = atom type.
pub const ATOM_NAMES: [&str; 36] = [
    "N", "CA", "C", "CB", "O", "CG", "CG1", "CG2", "OG", "OG1", "SG", "CD", "CD1", "CD2", "ND1",
    "ND2", "OD1", "OD2", "SD", "CE", "CE1", "CE2", "CE3", "NE", "NE1", "NE2", "OE1", "OE2", "CH2",
    "NH1", "NH2", "OH", "CZ", "CZ2", "CZ3", "NZ",
];

/// Side-chain slots used by the Cβ–side-chain RBF: every roster atom except
/// the backbone N, CA, C, O. 32 entries.
pub const SIDECHAIN_SLOTS: usize = 32;

pub const BACKBONE: [&str; 4] = ["N", "CA", "C", "O"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AminoAcid {
    Ala,
    Arg,
    Asn,
    Asp,
    Cys,
    Gln,
    Glu,
    Gly,
    His,
    Ile,
    Leu,
    Lys,
    Met,
    Phe,
    Pro,
    Ser,
    Thr,
    Trp,
    Tyr,
    Val,
    Unk,
}

use AminoAcid::*;

const ALL: [AminoAcid; 21] = [
    Ala, Arg, Asn, Asp, Cys, Gln, Glu, Gly, His, Ile, Leu, Lys, Met, Phe, Pro, Ser, Thr, Trp, Tyr,
    Val, Unk,
];

const THREE: [&str; 21] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL", "UNK",
];

const ONE: [char; 21] = [
    'A', 'R', 'N', 'D', 'C', 'Q', 'E', 'G', 'H', 'I', 'L', 'K', 'M', 'F', 'P', 'S', 'T', 'W', 'Y',
    'V', 'X',
];

const ROSTERS: [&[&str]; 21] = [
    &["N", "CA", "C", "O", "CB"],
    &["N", "CA", "C", "O", "CB", "CG", "CD", "NE", "CZ", "NH1", "NH2"],
    &["N", "CA", "C", "O", "CB", "CG", "OD1", "ND2"],
    &["N", "CA", "C", "O", "CB", "CG", "OD1", "OD2"],
    &["N", "CA", "C", "O", "CB", "SG"],
    &["N", "CA", "C", "O", "CB", "CG", "CD", "OE1", "NE2"],
    &["N", "CA", "C", "O", "CB", "CG", "CD", "OE1", "OE2"],
    &["N", "CA", "C", "O"],
    &["N", "CA", "C", "O", "CB", "CG", "ND1", "CD2", "CE1", "NE2"],
    &["N", "CA", "C", "O", "CB", "CG1", "CG2", "CD1"],
    &["N", "CA", "C", "O", "CB", "CG", "CD1", "CD2"],
    &["N", "CA", "C", "O", "CB", "CG", "CD", "CE", "NZ"],
    &["N", "CA", "C", "O", "CB", "CG", "SD", "CE"],
    &["N", "CA", "C", "O", "CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ"],
    &["N", "CA", "C", "O", "CB", "CG", "CD"],
    &["N", "CA", "C", "O", "CB", "OG"],
    &["N", "CA", "C", "O", "CB", "OG1", "CG2"],
    &["N", "CA", "C", "O", "CB", "CG", "CD1", "CD2", "NE1", "CE2", "CE3", "CZ2", "CZ3", "CH2"],
    &["N", "CA", "C", "O", "CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ", "OH"],
    &["N", "CA", "C", "O", "CB", "CG1", "CG2"],
    &["N", "CA", "C", "O"],
];

impl AminoAcid {
    pub fn canonical() -> &'static [AminoAcid] {
        &ALL[..NUM_CANONICAL]
    }

    /// Token index in the residue vocabulary (0..=20).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<AminoAcid> {
        ALL.get(i).copied()
    }

    pub fn three_letter(self) -> &'static str {
        THREE[self.index()]
    }

    pub fn one_letter(self) -> char {
        ONE[self.index()]
    }

    /// Maps a residue name to an amino acid. Known modified residues map to
    /// their standard parent; anything else is `Unk`.
    pub fn from_three_letter(name: &str) -> AminoAcid {
        let name = name.trim().to_ascii_uppercase();
        if let Some(i) = THREE.iter().position(|t| *t == name) {
            return ALL[i];
        }
        match parent_of_modified(&name) {
            Some(aa) => aa,
            None => Unk,
        }
    }

    pub fn from_one_letter(c: char) -> AminoAcid {
        let c = c.to_ascii_uppercase();
        ONE.iter().position(|o| *o == c).map(|i| ALL[i]).unwrap_or(Unk)
    }

    /// Heavy atoms of the residue in PDB order (N, CA, C, O, side chain).
    pub fn heavy_atoms(self) -> &'static [&'static str] {
        ROSTERS[self.index()]
    }

    pub fn sidechain_atoms(self) -> &'static [&'static str] {
        &ROSTERS[self.index()][4..]
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.three_letter())
    }
}

/// Modified residues that are treated as their standard parent.
pub fn parent_of_modified(name: &str) -> Option<AminoAcid> {
    match name {
        "MSE" => Some(Met),
        _ => None,
    }
}

pub fn is_modified_polymer(name: &str) -> bool {
    parent_of_modified(name.trim()).is_some()
}

/// Atom type index in the 37-entry vocabulary.
pub fn atom_type(name: &str) -> usize {
    // Selenium of MSE stands in for the methionine sulfur.
    let name = if name == "SE" { "SD" } else { name };
    ATOM_NAMES.iter().position(|a| *a == name).unwrap_or(UNK_ATOM)
}

/// Slot of a side-chain atom in the 32-slot Cβ–side-chain layout.
pub fn sidechain_slot(name: &str) -> Option<usize> {
    match atom_type(name) {
        UNK_ATOM => None,
        t if t <= 2 => None, // N, CA, C
        3 => Some(0),        // CB
        4 => None,           // O
        t => Some(t - 4),
    }
}

pub fn is_backbone(name: &str) -> bool {
    BACKBONE.contains(&name)
}

/// Decodes a one-letter sequence into residue tokens.
pub fn tokenize(seq: &str) -> Vec<usize> {
    seq.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| AminoAcid::from_one_letter(c).index())
        .collect()
}

/// Renders tokens as one-letter codes; non-amino-acid tokens become `X`.
pub fn detokenize(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|&t| AminoAcid::from_index(t).map(|a| a.one_letter()).unwrap_or('X'))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidechain_slots_cover_32_names() {
        let slots: Vec<_> = ATOM_NAMES.iter().filter_map(|n| sidechain_slot(n)).collect();
        assert_eq!(slots.len(), SIDECHAIN_SLOTS);
        let mut sorted = slots.clone();
        sorted.sort();
        assert_eq!(sorted, (0..SIDECHAIN_SLOTS).collect::<Vec<_>>());
    }

    #[test]
    fn rosters_use_known_atom_names() {
        for aa in AminoAcid::canonical() {
            for name in aa.heavy_atoms() {
                assert_ne!(atom_type(name), UNK_ATOM, "{aa} {name}");
            }
        }
        assert_eq!(atom_type("OXT"), UNK_ATOM);
    }

    #[test]
    fn mse_maps_to_met() {
        assert_eq!(AminoAcid::from_three_letter("MSE"), Met);
        assert_eq!(AminoAcid::from_three_letter("HOH"), Unk);
        assert_eq!(detokenize(&tokenize("ACDX")), "ACDX");
    }
}

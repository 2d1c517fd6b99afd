//! In-memory macromolecular model shared by every downstream module.

mod mmcif;
mod pdb;

pub use mmcif::parse_mmcif;
pub use pdb::{parse_pdb, write_pdb};

use crate::geometry::{RigidMotion, Vec3};
use crate::residue::AminoAcid;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("line {line}: {message}: `{context}`")]
    Parse { line: usize, message: String, context: String },
    #[error("no polymer chains in structure")]
    Empty,
    #[error("residue {residue} of chain {chain}: missing backbone atom {atom}")]
    FrameUnavailable { chain: String, residue: i32, atom: &'static str },
    #[error("unknown structure format `{0}` (expected pdb or mmcif)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub element: String,
    pub pos: Vec3,
    pub resolved: bool,
}

impl Atom {
    pub fn new(name: &str, element: &str, pos: Vec3) -> Self {
        Self { name: name.to_string(), element: element.to_string(), pos, resolved: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residue {
    /// 0-based position in the chain.
    pub index: usize,
    /// Author residue number.
    pub seq_id: i32,
    pub insertion: Option<char>,
    /// Residue name as written in the file.
    pub name: String,
    pub aa: AminoAcid,
    pub atoms: Vec<Atom>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    /// Position of a resolved atom.
    pub fn pos(&self, name: &str) -> Option<Vec3> {
        self.atom(name).filter(|a| a.resolved).map(|a| a.pos)
    }

    pub fn ca(&self) -> Option<Vec3> {
        self.pos("CA")
    }

    fn backbone(&self, chain: &str) -> Result<(Vec3, Vec3, Vec3), StructureError> {
        let get = |atom: &'static str| {
            self.pos(atom).ok_or_else(|| StructureError::FrameUnavailable {
                chain: chain.to_string(),
                residue: self.seq_id,
                atom,
            })
        };
        Ok((get("N")?, get("CA")?, get("C")?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChainRole {
    /// Chain whose sequence is being designed.
    Design,
    /// Fixed receptor chain; sequence and side chains visible.
    #[default]
    Target,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: String,
    pub residues: Vec<Residue>,
    pub role: ChainRole,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn sequence(&self) -> String {
        self.residues.iter().map(|r| r.aa.one_letter()).collect()
    }

    pub fn tokens(&self) -> Vec<usize> {
        self.residues.iter().map(|r| r.aa.index()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub id: String,
    pub chains: Vec<Chain>,
    pub resolution: Option<f64>,
    pub method: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pdb,
    Mmcif,
}

impl std::str::FromStr for Format {
    type Err = StructureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pdb" | "ent" => Ok(Format::Pdb),
            "cif" | "mmcif" => Ok(Format::Mmcif),
            other => Err(StructureError::UnknownFormat(other.to_string())),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self, StructureError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        ext.parse()
    }
}

pub fn parse_structure(bytes: &[u8], format: Format) -> Result<Structure, StructureError> {
    let text = String::from_utf8_lossy(bytes);
    match format {
        Format::Pdb => parse_pdb(&text),
        Format::Mmcif => parse_mmcif(&text),
    }
}

/// Global residue addressing: (chain index, residue index).
pub type ResidueRef = (usize, usize);

impl Structure {
    pub fn chain(&self, id: &str) -> Option<&Chain> {
        self.chains.iter().find(|c| c.id == id)
    }

    pub fn chain_index(&self, id: &str) -> Option<usize> {
        self.chains.iter().position(|c| c.id == id)
    }

    pub fn n_residues(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }

    /// Residues in chain order, each tagged with its chain index.
    pub fn residues(&self) -> impl Iterator<Item = (usize, &Residue)> {
        self.chains.iter().enumerate().flat_map(|(ci, c)| c.residues.iter().map(move |r| (ci, r)))
    }

    pub fn residue_refs(&self) -> Vec<ResidueRef> {
        self.residues().map(|(ci, r)| (ci, r.index)).collect()
    }

    /// Marks every chain whose id is listed as a design chain, others as targets.
    pub fn with_design_chains(mut self, design: &[&str]) -> Self {
        for c in &mut self.chains {
            c.role = if design.contains(&c.id.as_str()) { ChainRole::Design } else { ChainRole::Target };
        }
        self
    }

    /// Per-residue flag: residue belongs to a design chain.
    pub fn design_mask(&self) -> Vec<bool> {
        self.residues().map(|(ci, _)| self.chains[ci].role == ChainRole::Design).collect()
    }

    pub fn transformed(&self, motion: &RigidMotion) -> Structure {
        let mut out = self.clone();
        for chain in &mut out.chains {
            for res in &mut chain.residues {
                for atom in &mut res.atoms {
                    if atom.resolved {
                        atom.pos = motion.apply(&atom.pos);
                    }
                }
            }
        }
        out
    }

    /// Copy restricted to the listed chains, in the listed order.
    pub fn subset(&self, chain_ids: &[&str]) -> Structure {
        let chains = chain_ids.iter().filter_map(|id| self.chain(id).cloned()).collect();
        Structure { chains, ..self.clone() }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let mut ids = HashSet::new();
        for c in &self.chains {
            if !ids.insert(&c.id) {
                return Err(format!("duplicate chain id {}", c.id));
            }
            if c.residues.is_empty() {
                return Err(format!("chain {} is empty", c.id));
            }
            for (i, w) in c.residues.windows(2).enumerate() {
                if (w[0].seq_id, w[0].insertion) >= (w[1].seq_id, w[1].insertion) {
                    return Err(format!("chain {} residues out of order at {}", c.id, i));
                }
            }
            for (i, r) in c.residues.iter().enumerate() {
                if r.index != i {
                    return Err(format!("chain {} residue index {} != {}", c.id, r.index, i));
                }
                let mut names = HashSet::new();
                for a in &r.atoms {
                    if a.name.is_empty() || !names.insert(&a.name) {
                        return Err(format!("chain {} residue {} atom names", c.id, r.seq_id));
                    }
                    if a.resolved && !(a.pos.x.is_finite() && a.pos.y.is_finite() && a.pos.z.is_finite()) {
                        return Err(format!("non-finite atom in {} {}", c.id, r.seq_id));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ideal-geometry Cβ from the N–Cα–C frame; defined for glycine too.
pub fn pseudo_cbeta_from(n: &Vec3, ca: &Vec3, c: &Vec3) -> Vec3 {
    let b = ca - n;
    let cc = c - ca;
    let a = b.cross(&cc);
    -0.58273431 * a + 0.56802827 * b - 0.54067466 * cc + ca
}

pub fn pseudo_cbeta(residue: &Residue) -> Result<Vec3, StructureError> {
    let (n, ca, c) = residue.backbone("?")?;
    Ok(pseudo_cbeta_from(&n, &ca, &c))
}

/// Backbone N, CA, C positions or a frame-unavailable error naming the chain.
pub fn backbone_atoms(chain: &Chain, residue: &Residue) -> Result<(Vec3, Vec3, Vec3), StructureError> {
    residue.backbone(&chain.id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainFilter {
    pub min_len: usize,
    pub max_len: usize,
    pub max_unk_frac: f64,
    pub max_single_aa_frac: f64,
}

impl Default for ChainFilter {
    fn default() -> Self {
        Self { min_len: 20, max_len: 500, max_unk_frac: 0.10, max_single_aa_frac: 0.50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    MinLen,
    MaxLen,
    MaxUnkFrac,
    MaxSingleAaFrac,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub accepted: bool,
    pub reasons: Vec<FilterReason>,
}

/// Length and composition gate. Unknown-fraction must be strictly below its
/// threshold; no single canonical type may exceed its threshold.
pub fn filter_chain(chain: &Chain, f: &ChainFilter) -> FilterOutcome {
    let n = chain.len();
    let mut reasons = Vec::new();
    if n < f.min_len {
        reasons.push(FilterReason::MinLen);
    }
    if n > f.max_len {
        reasons.push(FilterReason::MaxLen);
    }
    if n > 0 {
        let mut counts = [0usize; 21];
        for r in &chain.residues {
            counts[r.aa.index()] += 1;
        }
        let unk = counts[AminoAcid::Unk.index()] as f64 / n as f64;
        if unk >= f.max_unk_frac {
            reasons.push(FilterReason::MaxUnkFrac);
        }
        let top = counts[..20].iter().copied().max().unwrap_or(0) as f64 / n as f64;
        if top > f.max_single_aa_frac {
            reasons.push(FilterReason::MaxSingleAaFrac);
        }
    }
    FilterOutcome { accepted: reasons.is_empty(), reasons }
}

pub(crate) fn element_from_name(name: &str) -> String {
    name.chars().find(|c| c.is_ascii_alphabetic()).map(|c| c.to_string()).unwrap_or_default()
}

pub(crate) fn is_hydrogen(element: &str) -> bool {
    matches!(element.trim().to_ascii_uppercase().as_str(), "H" | "D")
}

/// Accumulates atom records into chains. Shared by both file parsers.
#[derive(Default)]
pub(crate) struct Builder {
    chains: Vec<(String, Vec<RawResidue>)>,
}

pub(crate) struct RawResidue {
    seq_id: i32,
    insertion: Option<char>,
    name: String,
    atoms: Vec<(f64, Atom)>,
}

pub(crate) struct AtomRecord<'a> {
    pub hetatm: bool,
    pub name: &'a str,
    pub element: &'a str,
    pub res_name: &'a str,
    pub chain: &'a str,
    pub seq_id: i32,
    pub insertion: Option<char>,
    pub pos: Vec3,
    pub occupancy: f64,
}

impl Builder {
    pub fn push(&mut self, rec: AtomRecord<'_>) {
        let element =
            if rec.element.trim().is_empty() { element_from_name(rec.name) } else { rec.element.trim().to_string() };
        if is_hydrogen(&element) {
            return;
        }
        if rec.hetatm && !crate::residue::is_modified_polymer(rec.res_name) {
            return;
        }
        let ci = match self.chains.iter().position(|(id, _)| id == rec.chain) {
            Some(i) => i,
            None => {
                self.chains.push((rec.chain.to_string(), Vec::new()));
                self.chains.len() - 1
            }
        };
        let residues = &mut self.chains[ci].1;
        let ri = match residues.iter().rposition(|r| r.seq_id == rec.seq_id && r.insertion == rec.insertion) {
            Some(i) => i,
            None => {
                residues.push(RawResidue {
                    seq_id: rec.seq_id,
                    insertion: rec.insertion,
                    name: rec.res_name.trim().to_string(),
                    atoms: Vec::new(),
                });
                residues.len() - 1
            }
        };
        let atoms = &mut residues[ri].atoms;
        let atom = Atom::new(rec.name.trim(), &element, rec.pos);
        match atoms.iter_mut().find(|(_, a)| a.name == atom.name) {
            // Alternate location: strictly higher occupancy wins, else first seen.
            Some(slot) if rec.occupancy > slot.0 => *slot = (rec.occupancy, atom),
            Some(_) => {}
            None => atoms.push((rec.occupancy, atom)),
        }
    }

    pub fn finish(
        self,
        id: String,
        resolution: Option<f64>,
        method: Option<String>,
    ) -> Result<Structure, StructureError> {
        let mut chains = Vec::new();
        for (cid, mut raw) in self.chains {
            raw.sort_by_key(|r| (r.seq_id, r.insertion));
            let residues: Vec<Residue> = raw
                .into_iter()
                .enumerate()
                .map(|(i, r)| Residue {
                    index: i,
                    seq_id: r.seq_id,
                    insertion: r.insertion,
                    aa: AminoAcid::from_three_letter(&r.name),
                    name: r.name,
                    atoms: r.atoms.into_iter().map(|(_, a)| a).collect(),
                })
                .collect();
            if !residues.is_empty() {
                chains.push(Chain { id: cid, residues, role: ChainRole::default() });
            }
        }
        if chains.is_empty() {
            return Err(StructureError::Empty);
        }
        Ok(Structure { id, chains, resolution, method })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn chain_of(seq: &str) -> Chain {
        synth::ideal_chain("A", seq, &synth::helix_angles(seq.len()))
    }

    #[test]
    fn filter_accepts_balanced_25mer() {
        let c = chain_of("ACDEFGHIKLMNPQRSTVWYACDEF");
        let out = filter_chain(&c, &ChainFilter::default());
        assert!(out.accepted, "{:?}", out.reasons);
    }

    #[test]
    fn filter_rejects_short_chain() {
        let out = filter_chain(&chain_of("ACDEFGHIKL"), &ChainFilter::default());
        assert_eq!(out.reasons, vec![FilterReason::MinLen]);
    }

    #[test]
    fn filter_rejects_polyalanine() {
        let out = filter_chain(&chain_of(&"A".repeat(100)), &ChainFilter::default());
        assert_eq!(out.reasons, vec![FilterReason::MaxSingleAaFrac]);
    }

    #[test]
    fn filter_reports_every_violation() {
        let out = filter_chain(&chain_of(&"X".repeat(5)), &ChainFilter::default());
        assert_eq!(out.reasons, vec![FilterReason::MinLen, FilterReason::MaxUnkFrac]);
    }

    #[test]
    fn pseudo_cbeta_closed_form() {
        // N at origin, CA on x, C at the ideal N-CA-C angle in the xy plane.
        let n = Vec3::new(0.0, 0.0, 0.0);
        let ca = Vec3::new(1.458, 0.0, 0.0);
        let ang = 111.2f64.to_radians();
        let c = ca + 1.525 * Vec3::new(-ang.cos(), ang.sin(), 0.0);
        let got = pseudo_cbeta_from(&n, &ca, &c);
        // b = (1.458,0,0); c = 1.525(-cosθ, sinθ, 0); a = b×c = (0,0,1.458·1.525·sinθ)
        let (s, co) = (ang.sin(), ang.cos());
        let expect = Vec3::new(
            0.56802827 * 1.458 + 0.54067466 * 1.525 * co + 1.458,
            -0.54067466 * 1.525 * s,
            -0.58273431 * 1.458 * 1.525 * s,
        );
        assert!((got - expect).norm() < 1e-12);
        // Cβ sits ~1.52 Å from Cα.
        assert!(((got - ca).norm() - 1.52).abs() < 0.05);
    }

    #[test]
    fn pseudo_cbeta_missing_backbone() {
        let mut c = chain_of("AAA");
        c.residues[1].atoms.retain(|a| a.name != "N");
        assert!(matches!(pseudo_cbeta(&c.residues[1]), Err(StructureError::FrameUnavailable { atom: "N", .. })));
    }
}

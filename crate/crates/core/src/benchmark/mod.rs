//! Interface contacts, binder alignment, selective-binder curation and the
//! evaluation metrics built on them.

mod align;
mod curate;
mod eval;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::structure::{is_hydrogen, Residue, Structure};

pub use align::{align_binders, align_sequences, BinderAlignment, SeqAlignment};
pub use curate::{
    complex_class, curate_selectivity_set, ChainRef, ComplexClass, CurationParams, CurationReport, RejectReason,
    Rejection, SelectivityCase,
};
pub use eval::{
    eval_recovery, rank_decoys, selectivity_success, EvalRow, RankedDecoy, RecoveryCase, SuccessRate,
    SELECTIVITY_THRESHOLDS,
};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("chains share no aligned residue")]
    Unalignable,
    #[error("{what}: expected {expected} entries, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("position {position}: token {token} has no log-probability")]
    Token { position: usize, token: usize },
    #[error("top-k must be positive")]
    ZeroK,
}

/// (chain index in the structure, residue index in the chain).
pub type ResidueKey = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactDef {
    /// Minimum heavy-atom distance below 8 Å.
    Heavy8,
    /// Cα–Cα distance at most 10 Å.
    Ca10,
}

impl fmt::Display for ContactDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContactDef::Heavy8 => "heavy8",
            ContactDef::Ca10 => "ca10",
        })
    }
}

impl FromStr for ContactDef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heavy8" => Ok(ContactDef::Heavy8),
            "ca10" => Ok(ContactDef::Ca10),
            _ => Err(format!("unknown contact definition {s:?} (heavy8 | ca10)")),
        }
    }
}

pub const HEAVY_CUTOFF: f64 = 8.0;
pub const CA_CUTOFF: f64 = 10.0;

/// Unordered inter-chain residue pairs, stored with the smaller key first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactSet {
    pub definition: ContactDef,
    pairs: BTreeSet<(ResidueKey, ResidueKey)>,
}

impl ContactSet {
    pub fn new(definition: ContactDef) -> Self {
        Self { definition, pairs: BTreeSet::new() }
    }

    /// Adds a pair; intra-chain pairs are refused and `false` is returned.
    pub fn insert(&mut self, a: ResidueKey, b: ResidueKey) -> bool {
        if a.0 == b.0 {
            return false;
        }
        self.pairs.insert(if a < b { (a, b) } else { (b, a) })
    }

    pub fn contains(&self, a: ResidueKey, b: ResidueKey) -> bool {
        self.pairs.contains(&if a < b { (a, b) } else { (b, a) })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ResidueKey, ResidueKey)> {
        self.pairs.iter()
    }

    /// Residues of `chain` that take part in any pair.
    pub fn interface(&self, chain: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &(a, b) in &self.pairs {
            if a.0 == chain {
                out.insert(a.1);
            }
            if b.0 == chain {
                out.insert(b.1);
            }
        }
        out
    }
}

fn heavy_atoms(r: &Residue) -> Vec<Vec3> {
    r.atoms.iter().filter(|a| a.resolved && !is_hydrogen(&a.element)).map(|a| a.pos).collect()
}

/// Residue atoms with a bounding sphere: the Cα (or first atom) as centre and
/// the largest distance from it as radius.
struct Packed {
    atoms: Vec<Vec3>,
    centre: Vec3,
    radius: f64,
}

fn pack(r: &Residue) -> Option<Packed> {
    let atoms = heavy_atoms(r);
    let centre = r.ca().or_else(|| atoms.first().copied())?;
    let radius = atoms.iter().map(|a| (a - centre).norm()).fold(0.0, f64::max);
    Some(Packed { atoms, centre, radius })
}

fn min_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min((x - y).norm());
        }
    }
    best
}

/// Smallest heavy-atom distance between two residues; infinite if either has
/// no resolved heavy atom.
pub fn residue_min_distance(a: &Residue, b: &Residue) -> f64 {
    min_distance(&heavy_atoms(a), &heavy_atoms(b))
}

/// All inter-chain contacts. The bounding-sphere test only skips pairs that
/// cannot be in contact, so the result is exact.
pub fn contacts(s: &Structure, def: ContactDef) -> ContactSet {
    let mut out = ContactSet::new(def);
    match def {
        ContactDef::Ca10 => {
            let cas: Vec<Vec<Option<Vec3>>> =
                s.chains.iter().map(|c| c.residues.iter().map(|r| r.ca()).collect()).collect();
            for ci in 0..cas.len() {
                for cj in ci + 1..cas.len() {
                    for (i, a) in cas[ci].iter().enumerate() {
                        let Some(a) = a else { continue };
                        for (j, b) in cas[cj].iter().enumerate() {
                            if matches!(b, Some(b) if (a - b).norm() <= CA_CUTOFF) {
                                out.insert((ci, i), (cj, j));
                            }
                        }
                    }
                }
            }
        }
        ContactDef::Heavy8 => {
            let packed: Vec<Vec<Option<Packed>>> =
                s.chains.iter().map(|c| c.residues.iter().map(pack).collect()).collect();
            for ci in 0..packed.len() {
                for cj in ci + 1..packed.len() {
                    for (i, a) in packed[ci].iter().enumerate() {
                        let Some(a) = a else { continue };
                        for (j, b) in packed[cj].iter().enumerate() {
                            let Some(b) = b else { continue };
                            if (a.centre - b.centre).norm() - a.radius - b.radius >= HEAVY_CUTOFF {
                                continue;
                            }
                            if min_distance(&a.atoms, &b.atoms) < HEAVY_CUTOFF {
                                out.insert((ci, i), (cj, j));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `N / (L1 L2)`; 0 when either length is zero.
pub fn contact_density(cs: &ContactSet, l1: usize, l2: usize) -> f64 {
    if l1 == 0 || l2 == 0 {
        0.0
    } else {
        cs.len() as f64 / (l1 * l2) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredContact {
    pub a: ResidueKey,
    pub b: ResidueKey,
    pub score: f64,
}

/// How many predictions to keep: a fixed count or the shorter chain length
/// divided by a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopK {
    Fixed(usize),
    LengthOver(usize),
}

impl TopK {
    pub fn resolve(self, shorter_len: usize) -> usize {
        match self {
            TopK::Fixed(k) => k,
            TopK::LengthOver(d) => shorter_len / d.max(1),
        }
    }
}

impl FromStr for TopK {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(d) = s.strip_prefix("L/") {
            return d.parse().map(TopK::LengthOver).map_err(|_| format!("bad top-k {s:?}"));
        }
        s.parse().map(TopK::Fixed).map_err(|_| format!("bad top-k {s:?} (integer or L/<n>)"))
    }
}

/// Predictions sorted by descending score; ties keep input order.
pub fn ranked_contacts(predicted: &[ScoredContact]) -> Vec<ScoredContact> {
    let mut v = predicted.to_vec();
    v.sort_by(|x, y| y.score.total_cmp(&x.score));
    v
}

/// Hits among the `k` best predictions divided by `k`, even when fewer than
/// `k` true contacts exist.
pub fn topk_precision(predicted: &[ScoredContact], truth: &ContactSet, k: usize) -> Result<f64, BenchError> {
    if k == 0 {
        return Err(BenchError::ZeroK);
    }
    let hits = ranked_contacts(predicted).iter().take(k).filter(|c| truth.contains(c.a, c.b)).count();
    Ok(hits as f64 / k as f64)
}

/// `|A ∩ B| / |A ∪ B|`, defined as 0 for two empty sets.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard similarity after carrying every off-target residue through `map`.
/// A pair with an unmapped residue stays in the union but can never match.
pub fn jaccard_difficulty(on: &ContactSet, off: &ContactSet, map: impl Fn(ResidueKey) -> Option<ResidueKey>) -> f64 {
    let on_pairs: BTreeSet<_> = on.iter().copied().collect();
    let mut mapped = BTreeSet::new();
    let mut unmapped = 0usize;
    for &(a, b) in off.iter() {
        match (map(a), map(b)) {
            (Some(x), Some(y)) => {
                mapped.insert(if x < y { (x, y) } else { (y, x) });
            }
            _ => unmapped += 1,
        }
    }
    let inter = on_pairs.intersection(&mapped).count();
    let union = on_pairs.len() + mapped.len() - inter + unmapped;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

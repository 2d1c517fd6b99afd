use std::collections::{BTreeMap, HashSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::{PairedMsa, GAP};

pub const MEFF_IDENTITY: f64 = 0.65;

/// Fraction of identical residues over columns where neither row has a
/// gap; 0 when no such column exists.
pub fn identity(a: &[u8], b: &[u8]) -> f64 {
    let (mut same, mut both) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        if x != GAP && y != GAP {
            both += 1;
            if x == y {
                same += 1;
            }
        }
    }
    if both == 0 {
        0.0
    } else {
        same as f64 / both as f64
    }
}

/// Number of single-linkage clusters at `cutoff` identity.
pub fn meff(rows: &[&[u8]], cutoff: f64) -> usize {
    let n = rows.len();
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if identity(rows[i], rows[j]) >= cutoff {
                uf.union(i, j);
            }
        }
    }
    (0..n).map(|i| uf.find(i)).collect::<HashSet<_>>().len()
}

/// Position-based weights: in each column a residue type seen `k` times
/// among `r` distinct types gives each occupant `1 / (r k)`. Gaps count as
/// a type. Weights are normalized to sum to 1.
pub fn henikoff_weights(rows: &[&[u8]]) -> Vec<f64> {
    let n = rows.len();
    if n == 0 {
        return vec![];
    }
    let width = rows[0].len();
    let mut w = vec![0.0; n];
    for c in 0..width {
        let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
        for r in rows {
            *counts.entry(r[c]).or_default() += 1;
        }
        let r = counts.len() as f64;
        for (i, row) in rows.iter().enumerate() {
            w[i] += 1.0 / (r * counts[&row[c]] as f64);
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        w.iter_mut().for_each(|x| *x = 1.0 / n as f64);
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsaStats {
    /// Distinct species among paired (non-query) rows.
    pub n_species: usize,
    /// Rows including the query.
    pub depth: usize,
    pub meff: usize,
}

pub fn msa_stats(p: &PairedMsa) -> MsaStats {
    let species: HashSet<&str> = p.rows.iter().skip(1).filter_map(|r| r.provenance.species.as_deref()).collect();
    MsaStats { n_species: species.len(), depth: p.depth(), meff: meff(&p.sequences(), MEFF_IDENTITY) }
}

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::stats::identity;
use super::{MsaBlock, MsaError, GAP};

/// Where a paired row came from. Row indices count hits from 1 (0 is the
/// query); `None` marks a gap-only span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub src1: Option<usize>,
    pub src2: Option<usize>,
    pub species: Option<String>,
    /// Rank within the species group, from 0.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub seq: Vec<u8>,
    pub provenance: Provenance,
}

/// Concatenated alignment; row 0 is the paired query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMsa {
    pub len1: usize,
    pub len2: usize,
    pub rows: Vec<PairedRow>,
}

impl PairedMsa {
    fn with_query(m1: &MsaBlock, m2: &MsaBlock) -> Self {
        let mut seq = m1.query.seq.clone();
        seq.extend_from_slice(&m2.query.seq);
        let provenance = Provenance { src1: Some(0), src2: Some(0), species: None, rank: None };
        Self { len1: m1.width(), len2: m2.width(), rows: vec![PairedRow { seq, provenance }] }
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn sequences(&self) -> Vec<&[u8]> {
        self.rows.iter().map(|r| r.seq.as_slice()).collect()
    }
}

/// Hit indices (from 1) grouped by species in order of first appearance,
/// each group sorted by descending score then row order.
fn ranked_groups(m: &MsaBlock, scores: &[f64]) -> IndexMap<String, Vec<usize>> {
    let mut groups: IndexMap<String, Vec<usize>> = IndexMap::new();
    for (i, h) in m.hits.iter().enumerate() {
        if let Some(sp) = &h.species {
            groups.entry(sp.clone()).or_default().push(i);
        }
    }
    for g in groups.values_mut() {
        g.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        for x in g.iter_mut() {
            *x += 1;
        }
    }
    groups
}

/// Pairs hits of the same species by their rank under `scores1` and
/// `scores2` (one score per hit). Surplus ranks and hits without a species
/// are dropped.
pub fn pair_by_rank(m1: &MsaBlock, scores1: &[f64], m2: &MsaBlock, scores2: &[f64]) -> Result<PairedMsa, MsaError> {
    for (m, s, which) in [(m1, scores1, 1), (m2, scores2, 2)] {
        if s.len() != m.hits.len() {
            return Err(MsaError::Shape(format!("MSA {which} has {} hits but {} scores", m.hits.len(), s.len())));
        }
    }
    let g1 = ranked_groups(m1, scores1);
    let g2 = ranked_groups(m2, scores2);
    let mut out = PairedMsa::with_query(m1, m2);
    for (species, a) in &g1 {
        let Some(b) = g2.get(species) else { continue };
        for (rank, (&i, &j)) in a.iter().zip(b).enumerate() {
            let mut seq = m1.hits[i - 1].seq.clone();
            seq.extend_from_slice(&m2.hits[j - 1].seq);
            out.rows.push(PairedRow {
                seq,
                provenance: Provenance { src1: Some(i), src2: Some(j), species: Some(species.clone()), rank: Some(rank) },
            });
        }
    }
    Ok(out)
}

/// Ranks by column-attention similarity of each hit to the query.
pub fn pair_by_attention(m1: &MsaBlock, s1: &[f64], m2: &MsaBlock, s2: &[f64]) -> Result<PairedMsa, MsaError> {
    pair_by_rank(m1, s1, m2, s2)
}

/// Ranks by sequence identity of each hit to the query.
pub fn pair_phylogeny(m1: &MsaBlock, m2: &MsaBlock) -> Result<PairedMsa, MsaError> {
    let id = |m: &MsaBlock| -> Vec<f64> { m.hits.iter().map(|h| identity(&m.query.seq, &h.seq)).collect() };
    pair_by_rank(m1, &id(m1), m2, &id(m2))
}

/// Every hit on its own row, gap-padded over the other chain's span.
pub fn block_diagonalize(m1: &MsaBlock, m2: &MsaBlock) -> PairedMsa {
    let mut out = PairedMsa::with_query(m1, m2);
    let (c1, c2) = (m1.width(), m2.width());
    for (i, h) in m1.hits.iter().enumerate() {
        let mut seq = h.seq.clone();
        seq.resize(c1 + c2, GAP);
        let provenance = Provenance { src1: Some(i + 1), src2: None, species: h.species.clone(), rank: None };
        out.rows.push(PairedRow { seq, provenance });
    }
    for (j, h) in m2.hits.iter().enumerate() {
        let mut seq = vec![GAP; c1];
        seq.extend_from_slice(&h.seq);
        let provenance = Provenance { src1: None, src2: Some(j + 1), species: h.species.clone(), rank: None };
        out.rows.push(PairedRow { seq, provenance });
    }
    out
}

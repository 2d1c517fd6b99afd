use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::{align_binders, align_sequences, BinderAlignment};
use super::{contacts, ContactDef, CA_CUTOFF};
use crate::structure::{filter_chain, Chain, ChainFilter, FilterReason, Structure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationParams {
    /// Minimum Cα–Cα distance for two chains to count as interacting.
    pub interact_cutoff: f64,
    /// Partners at or above this identity are homomers, not heterodimers.
    pub max_partner_identity: f64,
    pub chain_filter: ChainFilter,
    pub cluster_identity: f64,
    pub cluster_coverage: f64,
    pub min_entries: usize,
    pub max_entries: usize,
    pub min_coverage: f64,
    pub min_identity: f64,
    pub max_rmsd: f64,
    pub max_difficulty: f64,
    pub seed: u64,
    /// Keep a uniform random subset of this many cases.
    pub sample: Option<usize>,
}

impl Default for CurationParams {
    fn default() -> Self {
        Self {
            interact_cutoff: CA_CUTOFF,
            max_partner_identity: 0.9,
            chain_filter: ChainFilter::default(),
            cluster_identity: 0.9,
            cluster_coverage: 0.8,
            min_entries: 2,
            max_entries: 30,
            min_coverage: 0.9,
            min_identity: 0.9,
            max_rmsd: 2.5,
            max_difficulty: 0.9,
            seed: 0,
            sample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChainRef {
    /// Position of the entry in the input list.
    pub entry: usize,
    pub entry_id: String,
    pub chain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ChainFilter(Vec<FilterReason>),
    Homomer,
    TooFewEntries,
    TooManyEntries,
    IdenticalTarget,
    Unalignable,
    BinderCoverage,
    BinderIdentity,
    BinderRmsd,
    Difficulty,
    NoOffTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub cluster: Option<usize>,
    pub chain: ChainRef,
    /// For off-target rejections, the on-target binder it was compared to.
    pub partner: Option<ChainRef>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivityCase {
    pub cluster: usize,
    pub binder_on: ChainRef,
    pub target_on: ChainRef,
    pub binder_off: ChainRef,
    pub target_off: ChainRef,
    /// Aligned (on binder, off binder) residue indices.
    pub pairs: Vec<(usize, usize)>,
    pub identity: f64,
    pub coverage: f64,
    pub rmsd: f64,
    pub difficulty: f64,
}

impl SelectivityCase {
    /// Off-target partner of every on-target binder residue.
    pub fn binder_map(&self, on_len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; on_len];
        for &(a, b) in &self.pairs {
            out[a] = Some(b);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub params: CurationParams,
    pub n_entries: usize,
    pub n_clusters: usize,
    pub cases: Vec<SelectivityCase>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexClass {
    Monomer,
    Homodimer,
    Heterodimer,
}

/// Class from the first two chains: no Cα contact means monomer, otherwise
/// the 90% identity split separates homo- from heterodimers.
pub fn complex_class(s: &Structure) -> ComplexClass {
    if s.chains.len() < 2 {
        return ComplexClass::Monomer;
    }
    let pair = s.subset(&[s.chains[0].id.as_str(), s.chains[1].id.as_str()]);
    if contacts(&pair, ContactDef::Ca10).is_empty() {
        return ComplexClass::Monomer;
    }
    let a = align_sequences(s.chains[0].sequence().as_bytes(), s.chains[1].sequence().as_bytes());
    if a.identity >= 0.9 && a.coverage >= 0.9 {
        ComplexClass::Homodimer
    } else {
        ComplexClass::Heterodimer
    }
}

struct ChainRec<'a> {
    entry: usize,
    chain: &'a Chain,
    seq: Vec<u8>,
    reference: ChainRef,
}

/// A directed binder/target pair from one entry.
#[derive(Clone, Copy)]
struct Interaction {
    binder: usize,
    target: usize,
}

fn min_ca_distance(a: &Chain, b: &Chain) -> f64 {
    let mut best = f64::INFINITY;
    for x in a.residues.iter().filter_map(|r| r.ca()) {
        for y in b.residues.iter().filter_map(|r| r.ca()) {
            best = best.min((x - y).norm());
        }
    }
    best
}

/// Binder residues within the Cα cutoff of any target residue.
fn binder_interface(binder: &Chain, target: &Chain) -> BTreeSet<usize> {
    let targets: Vec<_> = target.residues.iter().filter_map(|r| r.ca()).collect();
    binder
        .residues
        .iter()
        .enumerate()
        .filter(|(_, r)| r.ca().is_some_and(|p| targets.iter().any(|q| (p - q).norm() <= CA_CUTOFF)))
        .map(|(i, _)| i)
        .collect()
}

/// Jaccard of binder interfaces after moving the off-target interface onto
/// on-target numbering. Unaligned off-target residues only enlarge the union.
fn interface_difficulty(on: &BTreeSet<usize>, off: &BTreeSet<usize>, off_to_on: &[Option<usize>]) -> f64 {
    let mut mapped = BTreeSet::new();
    let mut stray = 0usize;
    for &i in off {
        match off_to_on[i] {
            Some(j) => {
                mapped.insert(j);
            }
            None => stray += 1,
        }
    }
    let inter = on.intersection(&mapped).count();
    let union = on.len() + mapped.len() - inter + stray;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

enum OffTarget {
    Kept(BinderAlignment, f64),
    Rejected(RejectReason),
}

fn judge(on: Interaction, off: Interaction, recs: &[ChainRec], p: &CurationParams) -> OffTarget {
    let (bo, to, bf, tf) = (&recs[on.binder], &recs[on.target], &recs[off.binder], &recs[off.target]);
    let targets = align_sequences(&to.seq, &tf.seq);
    if !targets.pairs.is_empty() && targets.identity >= 1.0 {
        return OffTarget::Rejected(RejectReason::IdenticalTarget);
    }
    let Ok(aln) = align_binders(bo.chain, bf.chain) else {
        return OffTarget::Rejected(RejectReason::Unalignable);
    };
    if aln.coverage < p.min_coverage {
        return OffTarget::Rejected(RejectReason::BinderCoverage);
    }
    if aln.identity < p.min_identity {
        return OffTarget::Rejected(RejectReason::BinderIdentity);
    }
    if aln.rmsd > p.max_rmsd {
        return OffTarget::Rejected(RejectReason::BinderRmsd);
    }
    let on_iface = binder_interface(bo.chain, to.chain);
    let off_iface = binder_interface(bf.chain, tf.chain);
    let d = interface_difficulty(&on_iface, &off_iface, &aln.map_b_to_a(bf.chain.len()));
    if d >= p.max_difficulty {
        return OffTarget::Rejected(RejectReason::Difficulty);
    }
    OffTarget::Kept(aln, d)
}

/// Builds selective-binder cases from a corpus of entries. Output order and
/// content depend only on the input order and `params.seed`.
pub fn curate_selectivity_set(entries: &[Structure], params: &CurationParams) -> CurationReport {
    let mut rejections = Vec::new();
    let mut recs: Vec<ChainRec> = Vec::new();
    let mut by_entry: Vec<Vec<usize>> = vec![Vec::new(); entries.len()];
    for (e, s) in entries.iter().enumerate() {
        for c in &s.chains {
            let reference = ChainRef { entry: e, entry_id: s.id.clone(), chain: c.id.clone() };
            let outcome = filter_chain(c, &params.chain_filter);
            if !outcome.accepted {
                rejections.push(Rejection {
                    cluster: None,
                    chain: reference,
                    partner: None,
                    reason: RejectReason::ChainFilter(outcome.reasons),
                });
                continue;
            }
            by_entry[e].push(recs.len());
            recs.push(ChainRec { entry: e, chain: c, seq: c.sequence().into_bytes(), reference });
        }
    }

    let mut interactions = Vec::new();
    for members in &by_entry {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if min_ca_distance(recs[i].chain, recs[j].chain) > params.interact_cutoff {
                    continue;
                }
                let a = align_sequences(&recs[i].seq, &recs[j].seq);
                if a.identity >= params.max_partner_identity && a.coverage >= params.cluster_coverage {
                    rejections.push(Rejection {
                        cluster: None,
                        chain: recs[i].reference.clone(),
                        partner: Some(recs[j].reference.clone()),
                        reason: RejectReason::Homomer,
                    });
                    continue;
                }
                interactions.push(Interaction { binder: i, target: j });
                interactions.push(Interaction { binder: j, target: i });
            }
        }
    }

    let binders: Vec<usize> = interactions.iter().map(|x| x.binder).collect::<BTreeSet<_>>().into_iter().collect();
    let mut uf = UnionFind::<usize>::new(binders.len());
    for x in 0..binders.len() {
        for y in x + 1..binders.len() {
            let a = align_sequences(&recs[binders[x]].seq, &recs[binders[y]].seq);
            if a.identity >= params.cluster_identity && a.coverage >= params.cluster_coverage {
                uf.union(x, y);
            }
        }
    }
    let slot: BTreeMap<usize, usize> = binders.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    // Clusters keyed by their smallest member, so numbering follows input order.
    let mut clusters: BTreeMap<usize, Vec<Interaction>> = BTreeMap::new();
    for it in &interactions {
        let root = uf.find(slot[&it.binder]);
        let key = (0..binders.len()).find(|&k| uf.find(k) == root).expect("root has a member");
        clusters.entry(key).or_default().push(*it);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cases = Vec::new();
    for (cluster_id, members) in clusters.values().enumerate() {
        let head = recs[members[0].binder].reference.clone();
        let n_entries = members.iter().map(|m| recs[m.binder].entry).collect::<BTreeSet<_>>().len();
        let reason = if n_entries < params.min_entries {
            Some(RejectReason::TooFewEntries)
        } else if n_entries > params.max_entries {
            Some(RejectReason::TooManyEntries)
        } else {
            None
        };
        if let Some(reason) = reason {
            rejections.push(Rejection { cluster: Some(cluster_id), chain: head, partner: None, reason });
            continue;
        }
        let on = members[rng.random_range(0..members.len())];
        let mut best: Option<(f64, Interaction, BinderAlignment)> = None;
        for &off in members {
            if off.binder == on.binder && off.target == on.target {
                continue;
            }
            match judge(on, off, &recs, params) {
                OffTarget::Kept(aln, d) => {
                    if best.as_ref().is_none_or(|(b, _, _)| d < *b) {
                        best = Some((d, off, aln));
                    }
                }
                OffTarget::Rejected(reason) => rejections.push(Rejection {
                    cluster: Some(cluster_id),
                    chain: recs[off.binder].reference.clone(),
                    partner: Some(recs[on.binder].reference.clone()),
                    reason,
                }),
            }
        }
        match best {
            Some((difficulty, off, aln)) => cases.push(SelectivityCase {
                cluster: cluster_id,
                binder_on: recs[on.binder].reference.clone(),
                target_on: recs[on.target].reference.clone(),
                binder_off: recs[off.binder].reference.clone(),
                target_off: recs[off.target].reference.clone(),
                pairs: aln.pairs,
                identity: aln.identity,
                coverage: aln.coverage,
                rmsd: aln.rmsd,
                difficulty,
            }),
            None => rejections.push(Rejection {
                cluster: Some(cluster_id),
                chain: recs[on.binder].reference.clone(),
                partner: None,
                reason: RejectReason::NoOffTarget,
            }),
        }
    }

    if let Some(k) = params.sample {
        if k < cases.len() {
            let mut keep = sample(&mut rng, cases.len(), k).into_vec();
            keep.sort_unstable();
            cases = keep.into_iter().map(|i| cases[i].clone()).collect();
        }
    }
    log::debug!("curated {} cases from {} entries", cases.len(), entries.len());
    CurationReport { params: params.clone(), n_entries: entries.len(), n_clusters: clusters.len(), cases, rejections }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curate::ComplexClass;
use super::{ranked_contacts, residue_min_distance, BenchError, ScoredContact, HEAVY_CUTOFF};
use crate::structure::Structure;

pub const SELECTIVITY_THRESHOLDS: [f64; 3] = [-10.0, -5.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub threshold: f64,
    /// `None` when there are no cases.
    pub rate: Option<f64>,
}

/// Fraction of cases whose `score_on − score_off` lies below each threshold.
pub fn selectivity_success(rows: &[(f64, f64)], thresholds: &[f64]) -> Vec<SuccessRate> {
    thresholds
        .iter()
        .map(|&threshold| {
            let rate = (!rows.is_empty()).then(|| {
                rows.iter().filter(|(on, off)| on - off < threshold).count() as f64 / rows.len() as f64
            });
            SuccessRate { threshold, rate }
        })
        .collect()
}

/// One designed chain against its native sequence. `logp[i]` holds
/// log-probabilities indexed by token for design position `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCase {
    pub class: ComplexClass,
    pub designed: Vec<usize>,
    pub native: Vec<usize>,
    pub logp: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub nsr: f64,
    pub ll: f64,
    pub ppl: f64,
    pub n_cases: usize,
}

/// Per-class averages of per-case recovery and native log-likelihood;
/// perplexity is `exp(−LL)` of the averaged LL.
pub fn eval_recovery(cases: &[RecoveryCase]) -> Result<BTreeMap<ComplexClass, EvalRow>, BenchError> {
    let mut sums: BTreeMap<ComplexClass, (f64, f64, usize)> = BTreeMap::new();
    for c in cases {
        let n = c.native.len();
        for (what, got) in [("designed", c.designed.len()), ("logp", c.logp.len())] {
            if got != n {
                return Err(BenchError::Length { what, expected: n, got });
            }
        }
        if n == 0 {
            continue;
        }
        let same = c.designed.iter().zip(&c.native).filter(|(a, b)| a == b).count();
        let mut ll = 0.0;
        for (i, (&t, row)) in c.native.iter().zip(&c.logp).enumerate() {
            ll += *row.get(t).ok_or(BenchError::Token { position: i, token: t })?;
        }
        let e = sums.entry(c.class).or_insert((0.0, 0.0, 0));
        e.0 += same as f64 / n as f64;
        e.1 += ll / n as f64;
        e.2 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(class, (nsr, ll, k))| {
            let ll = ll / k as f64;
            (class, EvalRow { nsr: nsr / k as f64, ll, ppl: (-ll).exp(), n_cases: k })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDecoy {
    /// Position in the input list.
    pub index: usize,
    pub id: String,
    pub score: usize,
}

/// Scores each decoy by how many of the `top_k` best predicted contacts it
/// realizes under the heavy-atom definition, then sorts descending. Equal
/// scores keep input order. Contacts naming a missing residue count as
/// unrealized.
pub fn rank_decoys(decoys: &[Structure], predicted: &[ScoredContact], top_k: usize) -> Vec<RankedDecoy> {
    let top: Vec<ScoredContact> = ranked_contacts(predicted).into_iter().take(top_k).collect();
    let mut out: Vec<RankedDecoy> = decoys
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let residue = |(c, r): (usize, usize)| s.chains.get(c).and_then(|ch| ch.residues.get(r));
            let score = top
                .iter()
                .filter(|p| match (residue(p.a), residue(p.b)) {
                    (Some(x), Some(y)) => p.a.0 != p.b.0 && residue_min_distance(x, y) < HEAVY_CUTOFF,
                    _ => false,
                })
                .count();
            RankedDecoy { index, id: s.id.clone(), score }
        })
        .collect();
    out.sort_by_key(|d| std::cmp::Reverse(d.score));
    out
}

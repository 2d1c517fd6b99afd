//! Sequence scores from bound and unbound model log-probabilities, and
//! rank statistics for comparing scores with measured affinities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{softmax, unbound_binder, PROB_FLOOR};
use crate::model::{ComplexInputs, DecodingOrder, ModelError, RedNet};
use crate::residue::NUM_CANONICAL;
use crate::structure::Structure;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("{what} has length {got}, expected {expected}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("{table} table has no row for position {position}")]
    MissingRow { table: &'static str, position: usize },
    #[error("token {token} at position {position} is outside the table's alphabet")]
    Token { position: usize, token: usize },
    #[error("need at least 2 pairs, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-position log-probabilities over an alphabet; rows may be absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogProbTable {
    pub rows: Vec<Option<Vec<f64>>>,
}

impl LogProbTable {
    pub fn new(rows: Vec<Option<Vec<f64>>>) -> Self {
        Self { rows }
    }

    pub fn full(rows: Vec<Vec<f64>>) -> Self {
        Self { rows: rows.into_iter().map(Some).collect() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn at(&self, table: &'static str, position: usize, token: usize) -> Result<f64, ScoreError> {
        let row = self.rows.get(position).and_then(Option::as_ref).ok_or(ScoreError::MissingRow { table, position })?;
        row.get(token).copied().ok_or(ScoreError::Token { position, token })
    }

    /// Adds `c` to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self { rows: self.rows.iter().map(|r| r.as_ref().map(|v| v.iter().map(|x| x + c).collect())).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub ll: f64,
    pub ll_global: f64,
    pub ll_mt: Option<f64>,
    pub ll_ref: Option<f64>,
    pub ll_cd: f64,
    pub ll_cd_ref: Option<f64>,
    pub n_binder: usize,
    pub n_complex: usize,
    pub n_mutated: usize,
}

impl ScoreReport {
    pub const COLUMNS: [&'static str; 9] =
        ["ll", "ll_global", "ll_mt", "ll_ref", "ll_cd", "ll_cd_ref", "n_binder", "n_complex", "n_mutated"];

    /// Metric by column name; counts are returned as floats.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "ll" => Some(self.ll),
            "ll_global" => Some(self.ll_global),
            "ll_mt" => self.ll_mt,
            "ll_ref" => self.ll_ref,
            "ll_cd" => Some(self.ll_cd),
            "ll_cd_ref" => self.ll_cd_ref,
            "n_binder" => Some(self.n_binder as f64),
            "n_complex" => Some(self.n_complex as f64),
            "n_mutated" => Some(self.n_mutated as f64),
            _ => None,
        }
    }
}

/// Inputs for [`score_sequence`]. Binder tables are indexed by binder
/// position; the complex table by complex position.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInputs<'a> {
    pub designed: &'a [usize],
    pub wildtype: &'a [usize],
    pub bound: &'a LogProbTable,
    pub unbound: &'a LogProbTable,
    pub complex_tokens: &'a [usize],
    pub complex: &'a LogProbTable,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn score_sequence(inp: &ScoreInputs<'_>) -> Result<ScoreReport, ScoreError> {
    let n = inp.designed.len();
    if inp.wildtype.len() != n {
        return Err(ScoreError::Length { what: "wild-type sequence", expected: n, got: inp.wildtype.len() });
    }
    if n == 0 {
        return Err(ScoreError::Length { what: "designed sequence", expected: 1, got: 0 });
    }
    if inp.complex_tokens.is_empty() {
        return Err(ScoreError::Length { what: "complex sequence", expected: 1, got: 0 });
    }
    let mut bound = Vec::with_capacity(n);
    let mut unbound = Vec::with_capacity(n);
    let mut mutated = Vec::new();
    for i in 0..n {
        let (a, wt) = (inp.designed[i], inp.wildtype[i]);
        bound.push(inp.bound.at("bound", i, a)?);
        unbound.push(inp.unbound.at("unbound", i, a)?);
        if a != wt {
            let wt_bound = inp.bound.at("bound", i, wt)?;
            let wt_unbound = inp.unbound.at("unbound", i, wt)?;
            mutated.push((i, wt_bound, wt_unbound));
        }
    }
    let complex: Vec<f64> = inp
        .complex_tokens
        .iter()
        .enumerate()
        .map(|(i, &t)| inp.complex.at("complex", i, t))
        .collect::<Result<_, _>>()?;

    let ll = mean(bound.iter().copied()).expect("non-empty");
    let ll_u = mean(unbound.iter().copied()).expect("non-empty");
    let ll_mt = mean(mutated.iter().map(|&(i, _, _)| bound[i]));
    let ll_ref = mean(mutated.iter().map(|&(i, wb, _)| bound[i] - wb));
    let ref_u = mean(mutated.iter().map(|&(i, _, wu)| unbound[i] - wu));
    Ok(ScoreReport {
        ll,
        ll_global: mean(complex.iter().copied()).expect("non-empty"),
        ll_mt,
        // with nothing mutated the designed-vs-wild-type difference is 0
        ll_ref: Some(ll_ref.unwrap_or(0.0)),
        ll_cd: ll - ll_u,
        ll_cd_ref: ll_ref.zip(ref_u).map(|(b, u)| b - u),
        n_binder: n,
        n_complex: complex.len(),
        n_mutated: mutated.len(),
    })
}

fn canonical_log_probs(logits: &[f64], vocab: usize, positions: &[usize]) -> Vec<Option<Vec<f64>>> {
    positions
        .iter()
        .map(|&p| Some(softmax(&logits[p * vocab..p * vocab + NUM_CANONICAL]).iter().map(|q| q.max(PROB_FLOOR).ln()).collect()))
        .collect()
}

/// Teacher-forced log-probability tables for one complex. The complex
/// table and tokens cover only residues with canonical amino acids.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTables {
    pub bound: LogProbTable,
    pub unbound: LogProbTable,
    pub complex_tokens: Vec<usize>,
    pub complex: LogProbTable,
}

/// Extracts tables with every designable position decoded in index order.
///
/// `binder_tokens` replaces the residues flagged in `design_mask`. The
/// bound table conditions on the full target; the unbound table uses the
/// binder chains alone; the complex table treats every residue as
/// designable, so each one conditions on the residues before it.
pub fn score_tables(
    model: &RedNet,
    s: &Structure,
    design_mask: &[bool],
    binder_tokens: &[usize],
) -> Result<ScoreTables, ScoreError> {
    let n = s.n_residues();
    if design_mask.len() != n {
        return Err(ScoreError::Length { what: "design mask", expected: n, got: design_mask.len() });
    }
    let positions: Vec<usize> = (0..n).filter(|&i| design_mask[i]).collect();
    if binder_tokens.len() != positions.len() {
        return Err(ScoreError::Length { what: "binder sequence", expected: positions.len(), got: binder_tokens.len() });
    }
    if let Some((k, &t)) = binder_tokens.iter().enumerate().find(|(_, &t)| t >= NUM_CANONICAL) {
        return Err(ScoreError::Token { position: k, token: t });
    }
    let cfg = &model.config;
    let vocab = cfg.vocab;

    let bound_inp = ComplexInputs::build(s, design_mask, cfg)?;
    let mut tokens = bound_inp.native.clone();
    for (k, &p) in positions.iter().enumerate() {
        tokens[p] = binder_tokens[k];
    }
    let logits = model.forward(&bound_inp, &tokens, &DecodingOrder::left_to_right(design_mask))?;
    let bound = LogProbTable::new(canonical_log_probs(logits.data(), vocab, &positions));

    let (binder, map) = unbound_binder(s, design_mask);
    let mut unbound_mask = vec![false; binder.n_residues()];
    let mut unbound_tokens: Vec<usize> = binder.residues().map(|(_, r)| r.aa.index()).collect();
    for (p, q) in map.iter().enumerate() {
        if let Some(q) = *q {
            unbound_mask[q] = design_mask[p];
            unbound_tokens[q] = tokens[p];
        }
    }
    let unbound_inp = ComplexInputs::build(&binder, &unbound_mask, cfg)?;
    let logits = model.forward(&unbound_inp, &unbound_tokens, &DecodingOrder::left_to_right(&unbound_mask))?;
    let unbound_positions: Vec<usize> = positions.iter().map(|&p| map[p].expect("design chains are kept")).collect();
    let unbound = LogProbTable::new(canonical_log_probs(logits.data(), vocab, &unbound_positions));

    let all = vec![true; n];
    let complex_inp = ComplexInputs::build(s, &all, cfg)?;
    let logits = model.forward(&complex_inp, &tokens, &DecodingOrder::left_to_right(&all))?;
    // Residues outside the canonical alphabet have no probability to score.
    let scored: Vec<usize> = (0..n).filter(|&i| tokens[i] < NUM_CANONICAL).collect();
    let complex = LogProbTable::new(canonical_log_probs(logits.data(), vocab, &scored));
    let complex_tokens = scored.iter().map(|&i| tokens[i]).collect();
    Ok(ScoreTables { bound, unbound, complex_tokens, complex })
}

/// Scores `designed` against `wildtype` (both binder-length, canonical
/// tokens) on structure `s`.
pub fn score_design(
    model: &RedNet,
    s: &Structure,
    design_mask: &[bool],
    designed: &[usize],
    wildtype: &[usize],
) -> Result<ScoreReport, ScoreError> {
    let t = score_tables(model, s, design_mask, designed)?;
    score_sequence(&ScoreInputs {
        designed,
        wildtype,
        bound: &t.bound,
        unbound: &t.unbound,
        complex_tokens: &t.complex_tokens,
        complex: &t.complex,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    /// `2^rel − 1`
    #[default]
    Exponential,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct NdcgConfig {
    pub gain: Gain,
    /// Cut-off rank; all items when `None`.
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub ndcg: Option<f64>,
    pub n: usize,
}

/// 1-based ranks; tied values share the mean of their ranks.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts in place and returns the number of inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    swaps
}

/// Kendall τ-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as u64;
    let n0 = n * n.saturating_sub(1) / 2;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let n1 = tied_pairs(&xs);
    let mut n3 = 0u64;
    let mut start = 0;
    for i in 1..=xs.len() {
        if i == xs.len() || xs[i] != xs[start] {
            n3 += tied_pairs(&ys[start..i]);
            start = i;
        }
    }
    let swaps = merge_count(&mut ys);
    let n2 = tied_pairs(&ys);
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    let concordant_minus_discordant = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Some((concordant_minus_discordant / denom).clamp(-1.0, 1.0))
}

/// NDCG of the ranking by descending score, with relevance the min-max
/// normalized affinity. Score ties keep input order.
pub fn ndcg(scores: &[f64], affinity: &[f64], cfg: &NdcgConfig) -> Option<f64> {
    let lo = affinity.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = affinity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let gain = |a: f64| {
        let rel = (a - lo) / (hi - lo);
        match cfg.gain {
            Gain::Exponential => rel.exp2() - 1.0,
            Gain::Linear => rel,
        }
    };
    let k = cfg.top_k.unwrap_or(scores.len()).min(scores.len());
    let dcg = |order: &[usize]| -> f64 {
        order.iter().take(k).enumerate().map(|(r, &i)| gain(affinity[i]) / ((r + 2) as f64).log2()).sum()
    };
    let mut by_score: Vec<usize> = (0..scores.len()).collect();
    by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ideal: Vec<usize> = (0..scores.len()).collect();
    ideal.sort_by(|&a, &b| affinity[b].total_cmp(&affinity[a]));
    let best = dcg(&ideal);
    (best > 0.0).then(|| dcg(&by_score) / best)
}

/// Spearman ρ, Kendall τ-b and NDCG of `(score, affinity)` pairs.
pub fn rank_metrics(pairs: &[(f64, f64)], cfg: &NdcgConfig) -> Result<RankMetrics, ScoreError> {
    if pairs.len() < 2 {
        return Err(ScoreError::TooFew(pairs.len()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(RankMetrics { spearman: spearman(&x, &y), kendall: kendall_tau_b(&x, &y), ndcg: ndcg(&x, &y, cfg), n: pairs.len() })
}

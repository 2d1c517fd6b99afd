use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::geometry::{kabsch, RigidMotion, Vec3};
use crate::structure::Chain;

const MATCH: i32 = 1;
const MISMATCH: i32 = 0;
const GAP: i32 = -1;

/// Global alignment of two sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqAlignment {
    /// Aligned (a index, b index) columns in increasing order.
    pub pairs: Vec<(usize, usize)>,
    /// Identical residues over aligned columns; 0 with no aligned column.
    pub identity: f64,
    /// Aligned columns over the shorter sequence length.
    pub coverage: f64,
    pub score: i32,
}

/// Needleman–Wunsch with match 1, mismatch 0 and linear gap −1. Traceback
/// prefers the diagonal, then a gap in `b`, then a gap in `a`.
pub fn align_sequences(a: &[u8], b: &[u8]) -> SeqAlignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut dp = vec![0i32; (n + 1) * w];
    for i in 0..=n {
        dp[i * w] = GAP * i as i32;
    }
    for j in 0..=m {
        dp[j] = GAP * j as i32;
    }
    let sub = |i: usize, j: usize| if a[i] == b[j] { MATCH } else { MISMATCH };
    for i in 1..=n {
        for j in 1..=m {
            let diag = dp[(i - 1) * w + j - 1] + sub(i - 1, j - 1);
            let up = dp[(i - 1) * w + j] + GAP;
            let left = dp[i * w + j - 1] + GAP;
            dp[i * w + j] = diag.max(up).max(left);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let here = dp[i * w + j];
        if here == dp[(i - 1) * w + j - 1] + sub(i - 1, j - 1) {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if here == dp[(i - 1) * w + j] + GAP {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    let same = pairs.iter().filter(|&&(x, y)| a[x] == b[y]).count();
    let identity = if pairs.is_empty() { 0.0 } else { same as f64 / pairs.len() as f64 };
    let shorter = n.min(m);
    let coverage = if shorter == 0 { 0.0 } else { pairs.len() as f64 / shorter as f64 };
    SeqAlignment { pairs, identity, coverage, score: dp[n * w + m] }
}

/// Sequence alignment plus a least-squares fit of `b`'s aligned Cα onto
/// `a`'s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderAlignment {
    pub pairs: Vec<(usize, usize)>,
    pub identity: f64,
    pub coverage: f64,
    pub rmsd: f64,
    /// Maps `b` coordinates onto `a`.
    pub motion: RigidMotion,
}

impl BinderAlignment {
    /// Partner of each residue of `a`, if aligned.
    pub fn map_a_to_b(&self, len_a: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; len_a];
        for &(x, y) in &self.pairs {
            out[x] = Some(y);
        }
        out
    }

    pub fn map_b_to_a(&self, len_b: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; len_b];
        for &(x, y) in &self.pairs {
            out[y] = Some(x);
        }
        out
    }
}

fn chain_bytes(c: &Chain) -> Vec<u8> {
    c.sequence().into_bytes()
}

/// Fails as unalignable when no column is aligned or no aligned pair has
/// both Cα resolved.
pub fn align_binders(a: &Chain, b: &Chain) -> Result<BinderAlignment, BenchError> {
    let sa = align_sequences(&chain_bytes(a), &chain_bytes(b));
    let (mut ref_pts, mut mob_pts): (Vec<Vec3>, Vec<Vec3>) = (Vec::new(), Vec::new());
    for &(x, y) in &sa.pairs {
        if let (Some(p), Some(q)) = (a.residues[x].ca(), b.residues[y].ca()) {
            ref_pts.push(p);
            mob_pts.push(q);
        }
    }
    let fit = kabsch(&ref_pts, &mob_pts).ok_or(BenchError::Unalignable)?;
    Ok(BinderAlignment {
        pairs: sa.pairs,
        identity: sa.identity,
        coverage: sa.coverage,
        rmsd: fit.rmsd,
        motion: fit.motion,
    })
}

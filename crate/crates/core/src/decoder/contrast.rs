/// Smallest probability fed to a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Temperatures at or below this value decode greedily.
pub const GREEDY_TEMPERATURE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastScores {
    pub scores: Vec<f64>,
    /// Some input probability fell below [`PROB_FLOOR`] and was clamped.
    pub clamped: bool,
}

fn clamped_log(p: f64, flag: &mut bool) -> f64 {
    if p < PROB_FLOOR {
        *flag = true;
        PROB_FLOOR.ln()
    } else {
        p.ln()
    }
}

/// `(1 + α) log p_on − α log p_off`, elementwise.
///
/// With `α = 0` the off-context term is skipped entirely, so the result is
/// bitwise `log p_on`.
pub fn contrastive_logits(p_on: &[f64], p_off: &[f64], alpha: f64) -> ContrastScores {
    assert_eq!(p_on.len(), p_off.len(), "probability vectors differ in length");
    let mut clamped = false;
    let scores = if alpha == 0.0 {
        p_on.iter().map(|&p| clamped_log(p, &mut clamped)).collect()
    } else {
        p_on.iter()
            .zip(p_off)
            .map(|(&a, &b)| {
                let la = clamped_log(a, &mut clamped);
                let lb = clamped_log(b, &mut clamped);
                (1.0 + alpha) * la - alpha * lb
            })
            .collect()
    };
    ContrastScores { scores, clamped }
}

/// Tokens whose probability is at least `β · max p`. Always contains the
/// argmax, and every tied maximum.
pub fn candidate_set(p_on: &[f64], beta: f64) -> Vec<usize> {
    let max = p_on.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = beta * max;
    (0..p_on.len()).filter(|&a| p_on[a] >= cut || p_on[a] == max).collect()
}

/// Softmax of `scores[c] / τ` over the candidates `c`, in candidate order.
pub fn restricted_softmax(scores: &[f64], candidates: &[usize], temperature: f64) -> Vec<f64> {
    let z: Vec<f64> = candidates.iter().map(|&c| scores[c] / temperature).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Candidate with the highest score; ties go to the lowest token index.
pub fn best_candidate(scores: &[f64], candidates: &[usize]) -> usize {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if scores[c] > scores[best] || (scores[c] == scores[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Inverse-CDF draw from `probs` with a uniform `u` in [0, 1).
pub fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the running sum just under 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Softmax of a logit row, stable for large magnitudes.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

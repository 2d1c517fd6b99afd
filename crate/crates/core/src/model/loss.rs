use crate::tensor::{Graph, Result, Tensor, Var};

/// A named set of positions contributing to the node loss with a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMask {
    pub name: String,
    pub weight: f64,
    pub mask: Vec<bool>,
}

impl NodeMask {
    pub fn new(name: &str, weight: f64, mask: Vec<bool>) -> Self {
        Self { name: name.to_string(), weight, mask }
    }
}

/// Joint token of an ordered residue pair.
pub fn pair_label(yi: usize, yj: usize, vocab: usize) -> usize {
    yi * vocab + yj
}

fn mean_ce(g: &mut Graph, log_probs: Var, width: usize, rows: &[usize], labels: &[usize]) -> Result<Option<Var>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let flat: Vec<usize> = rows.iter().zip(labels).map(|(&r, &y)| r * width + y).collect();
    let picked = g.take(log_probs, &flat)?;
    let total = g.sum_all(picked);
    Ok(Some(g.scale(total, -1.0 / rows.len() as f64)))
}

/// Σ_m w_m · mean cross-entropy over the positions of mask m. Empty masks
/// contribute zero.
pub fn node_loss(g: &mut Graph, logits: Var, labels: &[usize], masks: &[NodeMask]) -> Result<Var> {
    let width = g.shape(logits)[1];
    let lp = g.log_softmax(logits, 1)?;
    let mut total = g.constant(Tensor::scalar(0.0));
    for m in masks {
        let rows: Vec<usize> = (0..m.mask.len()).filter(|&i| m.mask[i]).collect();
        let ys: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
        if let Some(ce) = mean_ce(g, lp, width, &rows, &ys)? {
            let ce = g.scale(ce, m.weight);
            total = g.add(total, ce)?;
        }
    }
    Ok(total)
}

/// Mean cross-entropy of pair-token logits (E×R²) against joint labels.
pub fn edge_loss(g: &mut Graph, edge_logits: Var, pair_labels: &[usize]) -> Result<Var> {
    let width = g.shape(edge_logits)[1];
    let lp = g.log_softmax(edge_logits, 1)?;
    let rows: Vec<usize> = (0..pair_labels.len()).collect();
    match mean_ce(g, lp, width, &rows, pair_labels)? {
        Some(v) => Ok(v),
        None => Ok(g.constant(Tensor::scalar(0.0))),
    }
}

pub fn total_loss(g: &mut Graph, node: Var, edge: Var, edge_weight: f64) -> Result<Var> {
    let e = g.scale(edge, edge_weight);
    g.add(node, e)
}

use rand::Rng;

use super::layers::Linear;
use crate::geometry::Vec3;
use crate::tensor::{ParamStore, Result, Session, Tensor, Var};

/// Variable-degree query→key edges padded to a common width.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedNeighbors {
    pub n: usize,
    pub width: usize,
    /// Key index per slot; padded slots hold 0.
    pub key: Vec<usize>,
    pub mask: Vec<bool>,
}

impl PaddedNeighbors {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> (Self, Vec<Option<usize>>) {
        let mut counts = vec![0usize; n];
        for &(q, _) in edges {
            counts[q] += 1;
        }
        let width = counts.iter().copied().max().unwrap_or(0).max(1);
        let mut p = Self { n, width, key: vec![0; n * width], mask: vec![false; n * width] };
        let mut slot_edge = vec![None; n * width];
        let mut fill = vec![0usize; n];
        for (e, &(q, k)) in edges.iter().enumerate() {
            let slot = q * width + fill[q];
            fill[q] += 1;
            p.key[slot] = k;
            p.mask[slot] = true;
            slot_edge[slot] = Some(e);
        }
        (p, slot_edge)
    }

    pub fn queries(&self) -> Vec<usize> {
        (0..self.n * self.width).map(|s| s / self.width).collect()
    }

    /// Squared query→key distances per slot scaled by `1/scale²`; zero on padding.
    pub fn squared_distances(&self, x: &[Vec3], y: &[Vec3], scale: f64) -> Tensor {
        Tensor::from_fn(&[self.n * self.width, 1], |s| {
            if self.mask[s] {
                (y[self.key[s]] - x[s / self.width]).norm_squared() / (scale * scale)
            } else {
                0.0
            }
        })
    }
}

/// Attention from query nodes to key nodes driven by invariant squared
/// distances; returns the projected update without a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct EgatLayer {
    pub message: Linear,
    pub wq: Linear,
    pub wk: Linear,
    pub we: Linear,
    pub score: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
    pub slope: f64,
}

impl EgatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        edge_width: usize,
        heads: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let n = |s: &str| format!("{name}.{s}");
        let cat = 2 * width + 1 + edge_width;
        Self {
            message: Linear::new(store, &n("message"), cat, width, rng),
            wq: Linear::new(store, &n("wq"), width, width, rng),
            wk: Linear::no_bias(store, &n("wk"), width, width, rng),
            we: Linear::no_bias(store, &n("we"), width, width, rng),
            score: Linear::no_bias(store, &n("score"), width, heads, rng),
            value: Linear::new(store, &n("value"), cat, width, rng),
            out: Linear::new(store, &n("out"), 2 * width, width, rng),
            heads,
            slope,
        }
    }

    /// `q`: Nq×W, `k`: Nk×W, `dist2`: (Nq·width)×1, `e`: (Nq·width)×E.
    pub fn forward(&self, sess: &mut Session, q: Var, k: Var, dist2: Var, e: Var, nb: &PaddedNeighbors) -> Result<Var> {
        Ok(self.forward_with_attention(sess, q, k, dist2, e, nb)?.0)
    }

    /// Output and the Nq×width×H attention weights (zero on padding).
    pub fn forward_with_attention(
        &self,
        sess: &mut Session,
        q: Var,
        k: Var,
        dist2: Var,
        e: Var,
        nb: &PaddedNeighbors,
    ) -> Result<(Var, Var)> {
        let (n, w, h) = (nb.n, nb.width, self.heads);
        let width = self.out.d_out;
        let dh = width / h;
        let qi = sess.graph.gather_rows(q, &nb.queries())?;
        let kj = sess.graph.gather_rows(k, &nb.key)?;
        let cat = sess.graph.concat(&[qi, kj, dist2, e], 1)?;
        let m = self.message.forward(sess, cat)?;

        let aq = self.wq.forward(sess, q)?;
        let aq = sess.graph.gather_rows(aq, &nb.queries())?;
        let ak = self.wk.forward(sess, k)?;
        let ak = sess.graph.gather_rows(ak, &nb.key)?;
        let am = self.we.forward(sess, m)?;
        let a = sess.graph.add(aq, ak)?;
        let a = sess.graph.add(a, am)?;
        let a = sess.graph.leaky_relu(a, self.slope);
        let a = self.score.forward(sess, a)?;
        let a = sess.graph.reshape(a, &[n, w, h])?;
        let keep: Vec<bool> = (0..n * w * h).map(|x| nb.mask[x / h]).collect();
        let a = sess.graph.masked_fill(a, &keep)?;
        let a = sess.graph.softmax(a, 1)?;
        let maskf = sess.graph.constant(Tensor::from_fn(&[n, w, 1], |s| if nb.mask[s] { 1.0 } else { 0.0 }));
        let alpha = sess.graph.mul(a, maskf)?;

        let v = self.value.forward(sess, cat)?;
        let v = sess.graph.reshape(v, &[n, w, h, dh])?;
        let a4 = sess.graph.reshape(alpha, &[n, w, h, 1])?;
        let o = sess.graph.mul(v, a4)?;
        let o = sess.graph.sum_axis(o, 1)?;
        let o = sess.graph.reshape(o, &[n, width])?;
        let qo = sess.graph.concat(&[q, o], 1)?;
        Ok((self.out.forward(sess, qo)?, alpha))
    }
}

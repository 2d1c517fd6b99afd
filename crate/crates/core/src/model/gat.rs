use rand::Rng;

use super::layers::{Linear, Mlp};
use crate::tensor::{ParamStore, Result, Session, Tensor, Var};

/// Fixed-K neighbour lists with a validity mask. Padded slots point at the
/// row's own node so gathers stay in bounds; the mask removes them.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLayout {
    pub n: usize,
    pub k: usize,
    pub index: Vec<usize>,
    pub mask: Vec<bool>,
}

impl NeighborLayout {
    pub fn new(n: usize, k: usize, index: &[usize], mask: &[bool]) -> Self {
        let index = index.iter().enumerate().map(|(e, &j)| if mask[e] && j < n { j } else { e / k.max(1) }).collect();
        Self { n, k, index, mask: mask.to_vec() }
    }

    /// Same neighbours with an extra per-edge restriction.
    pub fn restricted(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mask = (0..self.n * self.k).map(|e| self.mask[e] && keep(e / self.k, self.index[e])).collect();
        Self { mask, ..self.clone() }
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.n * self.k).map(|e| e / self.k).collect()
    }
}

/// Graph attention layer with a gated mean-pool branch and a gated
/// attention branch over neighbour messages.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub edge: Linear,
    pub source: Linear,
    pub target: Linear,
    pub message: Mlp,
    pub pool_gate: Linear,
    pub pool_out: Linear,
    pub attn_hidden: Linear,
    pub attn_score: Linear,
    pub value: Linear,
    pub attn_gate: Linear,
    pub attn_out: Linear,
    pub transition: Mlp,
    pub heads: usize,
    pub slope: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GatOutput {
    pub nodes: Var,
    /// Attention weights, N×K×H; zero on masked slots.
    pub attention: Var,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        edge_width: usize,
        heads: usize,
        slope: f64,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let n = |s: &str| format!("{name}.{s}");
        Self {
            edge: Linear::new(store, &n("edge"), edge_width, width, rng),
            source: Linear::no_bias(store, &n("source"), width, width, rng),
            target: Linear::no_bias(store, &n("target"), width, width, rng),
            message: Mlp::new(store, &n("message"), width, width, width, rng),
            pool_gate: Linear::gate(store, &n("pool_gate"), width, width, rng),
            pool_out: Linear::new(store, &n("pool_out"), width, width, rng),
            attn_hidden: Linear::new(store, &n("attn_hidden"), width, width, rng),
            attn_score: Linear::no_bias(store, &n("attn_score"), width, heads, rng),
            value: Linear::new(store, &n("value"), width, width, rng),
            attn_gate: Linear::gate(store, &n("attn_gate"), width, width, rng),
            attn_out: Linear::new(store, &n("attn_out"), width, width, rng),
            transition: Mlp::new(store, &n("transition"), width, 2 * width, width, rng),
            heads,
            slope,
            dropout,
        }
    }

    /// `s`: N×W node states, `p`: (N·K)×E edge features.
    pub fn forward(&self, sess: &mut Session, s: Var, p: Var, nb: &NeighborLayout) -> Result<GatOutput> {
        let (n, k, h) = (nb.n, nb.k, self.heads);
        let width = self.value.d_out;
        let dh = width / h;

        let pe = self.edge.forward(sess, p)?;
        let src = self.source.forward(sess, s)?;
        let src = sess.graph.gather_rows(src, &nb.index)?;
        let tgt = self.target.forward(sess, s)?;
        let tgt = sess.graph.gather_rows(tgt, &nb.targets())?;
        let m = sess.graph.add(pe, src)?;
        let m = sess.graph.add(m, tgt)?;
        let m = self.message.forward(sess, m)?;

        // gated mean over valid neighbours
        let maskf = Tensor::from_fn(&[n, k, 1], |e| if nb.mask[e] { 1.0 } else { 0.0 });
        let inv_count = Tensor::from_fn(&[n, 1], |i| {
            let c = nb.mask[i * k..(i + 1) * k].iter().filter(|&&v| v).count();
            if c == 0 { 0.0 } else { 1.0 / c as f64 }
        });
        let maskf = sess.graph.constant(maskf);
        let inv_count = sess.graph.constant(inv_count);
        let m3 = sess.graph.reshape(m, &[n, k, width])?;
        let masked = sess.graph.mul(m3, maskf)?;
        let pooled = sess.graph.sum_axis(masked, 1)?;
        let pooled = sess.graph.mul(pooled, inv_count)?;
        let gate = self.pool_gate.forward(sess, s)?;
        let gate = sess.graph.sigmoid(gate);
        let gated = sess.graph.mul(gate, pooled)?;
        let mut delta = self.pool_out.forward(sess, gated)?;

        // gated attention over neighbours
        let a = self.attn_hidden.forward(sess, m)?;
        let a = sess.graph.leaky_relu(a, self.slope);
        let a = self.attn_score.forward(sess, a)?;
        let a = sess.graph.reshape(a, &[n, k, h])?;
        let keep: Vec<bool> = (0..n * k * h).map(|x| nb.mask[x / h]).collect();
        let a = sess.graph.masked_fill(a, &keep)?;
        let a = sess.graph.softmax(a, 1)?;
        let alpha = sess.graph.mul(a, maskf)?;
        let v = self.value.forward(sess, m)?;
        let v = sess.graph.reshape(v, &[n, k, h, dh])?;
        let a4 = sess.graph.reshape(alpha, &[n, k, h, 1])?;
        let o = sess.graph.mul(v, a4)?;
        let o = sess.graph.sum_axis(o, 1)?;
        let o = sess.graph.reshape(o, &[n, width])?;
        let gate = self.attn_gate.forward(sess, s)?;
        let gate = sess.graph.sigmoid(gate);
        let gated = sess.graph.mul(gate, o)?;
        let d2 = self.attn_out.forward(sess, gated)?;
        delta = sess.graph.add(delta, d2)?;

        let delta = sess.graph.dropout(delta, self.dropout);
        let s = sess.graph.add(s, delta)?;
        let t = self.transition.forward(sess, s)?;
        let t = sess.graph.dropout(t, self.dropout);
        let nodes = sess.graph.add(s, t)?;
        Ok(GatOutput { nodes, attention: alpha })
    }
}

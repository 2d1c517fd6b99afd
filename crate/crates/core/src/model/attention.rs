use rand::Rng;

use super::layers::Linear;
use crate::tensor::{ParamStore, Result, Session, Tensor, Var};

/// Multi-head self-attention whose logits carry a learned bias from pair
/// features, with a sigmoid-gated output.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBiasAttention {
    pub query: Linear,
    pub key_value: Linear,
    pub bias: Linear,
    pub gate: Linear,
    pub out: Linear,
    pub heads: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PairAttentionOutput {
    pub nodes: Var,
    /// H×N×N weights; rows with no allowed entry are zero.
    pub attention: Var,
}

impl PairBiasAttention {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, pair_width: usize, heads: usize, rng: &mut impl Rng) -> Self {
        let n = |s: &str| format!("{name}.{s}");
        Self {
            query: Linear::no_bias(store, &n("query"), width, width, rng),
            key_value: Linear::no_bias(store, &n("key_value"), width, 2 * width, rng),
            bias: Linear::no_bias(store, &n("bias"), pair_width, heads, rng),
            gate: Linear::gate(store, &n("gate"), width, width, rng),
            out: Linear::no_bias(store, &n("out"), width, width, rng),
            heads,
        }
    }

    /// `s`: N×W, `pair`: (N·N)×P row-major over (i, j), `allow[i*N + j]`.
    pub fn forward(&self, sess: &mut Session, s: Var, pair: Var, allow: &[bool]) -> Result<PairAttentionOutput> {
        let n = sess.graph.shape(s)[0];
        let (h, width) = (self.heads, self.query.d_out);
        let dh = width / h;

        let q = self.query.forward(sess, s)?;
        let q = sess.graph.reshape(q, &[n, h, dh])?;
        let q = sess.graph.permute(q, &[1, 0, 2])?;
        let kv = self.key_value.forward(sess, s)?;
        let kv = sess.graph.reshape(kv, &[n, 2, h, dh])?;
        let kv = sess.graph.permute(kv, &[1, 2, 0, 3])?;
        let k = sess.graph.gather_rows(kv, &[0])?;
        let k = sess.graph.reshape(k, &[h, n, dh])?;
        let k = sess.graph.permute(k, &[0, 2, 1])?;
        let v = sess.graph.gather_rows(kv, &[1])?;
        let v = sess.graph.reshape(v, &[h, n, dh])?;

        let logits = sess.graph.matmul(q, k)?;
        let logits = sess.graph.scale(logits, 1.0 / (dh as f64).sqrt());
        let b = self.bias.forward(sess, pair)?;
        let b = sess.graph.reshape(b, &[n, n, h])?;
        let b = sess.graph.permute(b, &[2, 0, 1])?;
        let logits = sess.graph.add(logits, b)?;
        let keep: Vec<bool> = (0..h * n * n).map(|x| allow[x % (n * n)]).collect();
        let logits = sess.graph.masked_fill(logits, &keep)?;
        let alpha = sess.graph.softmax(logits, 2)?;
        let maskf = Tensor::from_fn(&[n, n], |x| if allow[x] { 1.0 } else { 0.0 });
        let maskf = sess.graph.constant(maskf);
        let alpha = sess.graph.mul(alpha, maskf)?;

        let o = sess.graph.matmul(alpha, v)?;
        let o = sess.graph.permute(o, &[1, 0, 2])?;
        let o = sess.graph.reshape(o, &[n, width])?;
        let g = self.gate.forward(sess, s)?;
        let g = sess.graph.sigmoid(g);
        let o = sess.graph.mul(g, o)?;
        let nodes = self.out.forward(sess, o)?;
        Ok(PairAttentionOutput { nodes, attention: alpha })
    }
}

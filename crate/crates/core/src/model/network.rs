use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::attention::PairBiasAttention;
use super::egat::EgatLayer;
use super::gat::{GatLayer, NeighborLayout};
use super::inputs::{pair_struct_width, ComplexInputs};
use super::layers::{Linear, Mlp};
use super::{DecodingOrder, ModelConfig, ModelError, Result};
use crate::container::Container;
use crate::featurize::{ATOM_EDGE_WIDTH, ATOM_NODE_WIDTH};
use crate::residue::MASK_TOKEN;
use crate::tensor::{Graph, ParamId, ParamStore, Session, Tensor, Var};

const LN_EPS: f64 = 1e-5;
pub const WEIGHTS_KIND: &str = "bindkit-weights";

#[derive(Debug, Clone, PartialEq)]
struct DecoderLayer {
    gat: GatLayer,
    attention: PairBiasAttention,
    transition: Mlp,
}

/// Encoder outputs as graph variables.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub nodes: Var,
    pub edges: Var,
}

/// Encoder outputs detached from any graph, reusable across decoding steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderCache {
    pub nodes: Tensor,
    pub edges: Tensor,
}

/// Structure-conditioned autoregressive sequence model.
#[derive(Debug, Clone, PartialEq)]
pub struct RedNet {
    pub config: ModelConfig,
    pub params: ParamStore,
    atom_embed: Linear,
    query_init: ParamId,
    atom_layers: Vec<EgatLayer>,
    edge_embed: Linear,
    encoder: Vec<GatLayer>,
    decoder: Vec<DecoderLayer>,
    head: Linear,
    edge_head: Linear,
}

fn residue_edge_width(bins: usize) -> usize {
    use crate::featurize::CORE_ATOMS;
    let cc = CORE_ATOMS * CORE_ATOMS;
    cc * bins + cc + crate::featurize::OFFSET_CLASSES + 1 + 3 * CORE_ATOMS + crate::residue::SIDECHAIN_SLOTS * bins
}

impl RedNet {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let mut p = ParamStore::new();
        let (w, h, r, slope) = (config.width, config.heads, config.vocab, config.leaky_slope);
        let atom_edge_width = ATOM_EDGE_WIDTH - 16 + config.rbf_bins;

        let atom_embed = Linear::new(&mut p, "atom.embed", ATOM_NODE_WIDTH, w, rng);
        let query_init = p.add_normal("atom.query_init", &[1, w], 1.0, rng);
        let atom_layers =
            (0..config.atom_layers).map(|l| EgatLayer::new(&mut p, &format!("atom.egat{l}"), w, atom_edge_width, h, slope, rng)).collect();
        let edge_embed = Linear::new(&mut p, "residue.edge_embed", residue_edge_width(config.rbf_bins), w, rng);
        let encoder = (0..config.residue_layers)
            .map(|l| GatLayer::new(&mut p, &format!("residue.gat{l}"), w, w, h, slope, config.dropout, rng))
            .collect();
        let pair_width = pair_struct_width(config.rbf_bins) + r;
        let decoder = (0..config.decoder_layers)
            .map(|l| DecoderLayer {
                gat: GatLayer::new(&mut p, &format!("decoder{l}.gat"), w, w + r, h, slope, config.dropout, rng),
                attention: PairBiasAttention::new(&mut p, &format!("decoder{l}.attention"), w, pair_width, h, rng),
                transition: Mlp::new(&mut p, &format!("decoder{l}.transition"), w, 2 * w, w, rng),
            })
            .collect();
        let head = Linear::new(&mut p, "head", w, r, rng);
        let edge_head = Linear::new(&mut p, "edge_head", 3 * w, r * r, rng);
        Ok(Self { config, params: p, atom_embed, query_init, atom_layers, edge_embed, encoder, decoder, head, edge_head })
    }

    /// Structure-only encoding; design residues contribute backbone atoms only,
    /// so the result carries no design-sequence information.
    pub fn encode(&self, sess: &mut Session, inp: &ComplexInputs) -> Result<Encoded> {
        let n = inp.n;
        let atoms = sess.graph.constant(inp.atom_nodes.clone());
        let keys = self.atom_embed.forward(sess, atoms)?;
        let q0 = sess.param(self.query_init);
        let mut q = sess.graph.gather_rows(q0, &vec![0; n])?;
        let d2 = sess.graph.constant(inp.atom_dist2.clone());
        let e = sess.graph.constant(inp.atom_edges.clone());
        for layer in &self.atom_layers {
            let upd = layer.forward(sess, q, keys, d2, e, &inp.atom_layout)?;
            let upd = sess.graph.dropout(upd, self.config.dropout);
            let sum = sess.graph.add(q, upd)?;
            q = sess.graph.layer_norm(sum, LN_EPS)?;
        }
        let raw = sess.graph.constant(inp.residue_edges.clone());
        let edges = self.edge_embed.forward(sess, raw)?;
        let mut s = q;
        for layer in &self.encoder {
            s = layer.forward(sess, s, edges, &inp.residue_layout)?.nodes;
        }
        Ok(Encoded { nodes: s, edges })
    }

    pub fn encode_cached(&self, inp: &ComplexInputs) -> Result<EncoderCache> {
        let mut sess = Session::new(&self.params, Graph::new());
        let enc = self.encode(&mut sess, inp)?;
        Ok(EncoderCache { nodes: sess.graph.value(enc.nodes).clone(), edges: sess.graph.value(enc.edges).clone() })
    }

    fn check_tokens(&self, inp: &ComplexInputs, tokens: &[usize], order: &DecodingOrder) -> Result<()> {
        if tokens.len() != inp.n {
            return Err(ModelError::Tokens { expected: inp.n, got: tokens.len() });
        }
        if order.len() != inp.n || (0..inp.n).any(|i| order.is_design(i) != inp.design_mask[i]) {
            return Err(ModelError::Order("decoding order does not match the design mask".into()));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.config.vocab) {
            return Err(ModelError::Order(format!("token {t} outside the vocabulary")));
        }
        Ok(())
    }

    /// Decoder node states (N×W). Residue `i` reads the token of `j` only
    /// when `order.visible(i, j)`; every other token is replaced by MASK.
    pub fn decode(
        &self,
        sess: &mut Session,
        inp: &ComplexInputs,
        enc: Encoded,
        tokens: &[usize],
        order: &DecodingOrder,
    ) -> Result<Var> {
        self.check_tokens(inp, tokens, order)?;
        let (n, r) = (inp.n, self.config.vocab);
        let seen = |i: usize, j: usize| if order.visible(i, j) { tokens[j] } else { MASK_TOKEN };

        let causal: NeighborLayout = inp.residue_layout.restricted(|i, j| order.visible(i, j));
        let k = causal.k;
        let tok_edges = Tensor::from_fn(&[n * k, r], |x| {
            let e = x / r;
            let (i, j) = (e / k, causal.index[e]);
            if inp.residue_layout.mask[e] && x % r == seen(i, j) { 1.0 } else { 0.0 }
        });
        let tok_edges = sess.graph.constant(tok_edges);
        let edge_in = sess.graph.concat(&[enc.edges, tok_edges], 1)?;

        let pw = inp.pair_struct.shape()[1];
        let ps = inp.pair_struct.data();
        let pair = Tensor::from_fn(&[n * n, pw + r], |x| {
            let (e, c) = (x / (pw + r), x % (pw + r));
            if c < pw {
                ps[e * pw + c]
            } else if c - pw == seen(e / n, e % n) {
                1.0
            } else {
                0.0
            }
        });
        let pair = sess.graph.constant(pair);
        let allow: Vec<bool> = (0..n * n).map(|e| e / n == e % n || order.visible(e / n, e % n)).collect();

        let mut s = enc.nodes;
        for layer in &self.decoder {
            s = layer.gat.forward(sess, s, edge_in, &causal)?.nodes;
            let x = sess.graph.layer_norm(s, LN_EPS)?;
            let a = layer.attention.forward(sess, x, pair, &allow)?.nodes;
            let a = sess.graph.dropout(a, self.config.dropout);
            s = sess.graph.add(s, a)?;
            let x = sess.graph.layer_norm(s, LN_EPS)?;
            let t = layer.transition.forward(sess, x)?;
            let t = sess.graph.dropout(t, self.config.dropout);
            s = sess.graph.add(s, t)?;
        }
        Ok(s)
    }

    /// Per-residue logits, N×R.
    pub fn logits(&self, sess: &mut Session, states: Var) -> Result<Var> {
        let x = sess.graph.layer_norm(states, LN_EPS)?;
        Ok(self.head.forward(sess, x)?)
    }

    /// Joint pair-token logits (E×R²) for residue-graph edges `(i, slot)`.
    pub fn edge_logits(&self, sess: &mut Session, inp: &ComplexInputs, states: Var, enc: Encoded, edges: &[usize]) -> Result<Var> {
        let k = inp.residue_layout.k;
        let src: Vec<usize> = edges.iter().map(|&e| e / k).collect();
        let dst: Vec<usize> = edges.iter().map(|&e| inp.residue_layout.index[e]).collect();
        let si = sess.graph.gather_rows(states, &src)?;
        let sj = sess.graph.gather_rows(states, &dst)?;
        let pe = sess.graph.gather_rows(enc.edges, edges)?;
        let cat = sess.graph.concat(&[si, sj, pe], 1)?;
        Ok(self.edge_head.forward(sess, cat)?)
    }

    /// Inference-mode logits for every residue (N×R).
    pub fn forward(&self, inp: &ComplexInputs, tokens: &[usize], order: &DecodingOrder) -> Result<Tensor> {
        let cache = self.encode_cached(inp)?;
        self.forward_cached(inp, &cache, tokens, order)
    }

    pub fn forward_cached(
        &self,
        inp: &ComplexInputs,
        cache: &EncoderCache,
        tokens: &[usize],
        order: &DecodingOrder,
    ) -> Result<Tensor> {
        let mut sess = Session::new(&self.params, Graph::new());
        let nodes = sess.graph.constant(cache.nodes.clone());
        let edges = sess.graph.constant(cache.edges.clone());
        let states = self.decode(&mut sess, inp, Encoded { nodes, edges }, tokens, order)?;
        let logits = self.logits(&mut sess, states)?;
        Ok(sess.graph.value(logits).clone())
    }

    pub fn to_container(&self) -> Container {
        let manifest: serde_json::Map<String, serde_json::Value> =
            self.params.iter().map(|(name, t)| (name.to_string(), json!(t.shape()))).collect();
        let mut c = Container::new(json!({
            "kind": WEIGHTS_KIND,
            "config": self.config,
            "manifest": manifest,
        }));
        for (name, t) in self.params.iter() {
            c.insert(name, t.clone());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.meta.get("kind").and_then(|k| k.as_str()) != Some(WEIGHTS_KIND) {
            return Err(ModelError::Weights("container is not a weight file".into()));
        }
        let config: ModelConfig = serde_json::from_value(c.meta["config"].clone())
            .map_err(|e| ModelError::Weights(format!("bad config: {e}")))?;
        let mut model = Self::new(config, 0)?;
        let mut stored = ParamStore::new();
        for (name, t) in &c.tensors {
            stored.add(name.clone(), t.clone());
        }
        let bad = model.params.load_from(&stored);
        if !bad.is_empty() {
            return Err(ModelError::Weights(format!("missing or mis-shaped tensors: {}", bad.join(", "))));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_container().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }

    /// Parameters rounded through the on-disk precision.
    pub fn rounded(&self) -> Self {
        Self::from_container(&Container::from_bytes(&self.to_container().to_bytes()).expect("round trip"))
            .expect("own weights load")
    }
}

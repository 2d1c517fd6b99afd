use rand::Rng;

use super::egat::PaddedNeighbors;
use super::layers::Linear;
use crate::featurize::GlinterGraph;
use crate::tensor::{ParamStore, Result, Session, Tensor, Var};

/// Convolution over a bipartite interface graph: per-edge messages from
/// source features, target features, edge features and the target position
/// expressed in the source's local frame, max-pooled per source node.
#[derive(Debug, Clone, PartialEq)]
pub struct CaConv {
    pub message: Linear,
    pub node: Linear,
}

#[derive(Debug, Clone)]
pub struct CaConvOutput {
    pub nodes: Var,
    /// Sources whose update was skipped because no local frame exists.
    pub skipped: Vec<bool>,
}

impl CaConv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        source_width: usize,
        target_width: usize,
        edge_width: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let d_in = source_width + target_width + edge_width + 3;
        Self {
            message: Linear::new(store, &format!("{name}.message"), d_in, hidden, rng),
            node: Linear::new(store, &format!("{name}.node"), hidden, hidden, rng),
        }
    }

    pub fn for_graph(store: &mut ParamStore, name: &str, g: &GlinterGraph, hidden: usize, rng: &mut impl Rng) -> Self {
        Self::new(store, name, g.source_width, g.target_width, g.edge_width, hidden, rng)
    }

    /// `sources`: Ns×Ws, `targets`: Nt×Wt node features.
    pub fn forward(&self, sess: &mut Session, g: &GlinterGraph, sources: Var, targets: Var) -> Result<CaConvOutput> {
        let skipped: Vec<bool> = g.source_frames.iter().map(Option::is_none).collect();
        let edges: Vec<(usize, usize)> = g.edges.iter().copied().filter(|&(q, _)| !skipped[q]).collect();
        let keep_edge: Vec<usize> = (0..g.edges.len()).filter(|&e| !skipped[g.edges[e].0]).collect();
        let (nb, slot_edge) = PaddedNeighbors::from_edges(g.n_sources, &edges);
        let (n, w) = (nb.n, nb.width);
        let hidden = self.node.d_out;

        let offsets = g.standardized_offsets();
        let ew = g.edge_width;
        let extra = Tensor::from_fn(&[n * w, ew + 3], |x| {
            let (slot, c) = (x / (ew + 3), x % (ew + 3));
            match slot_edge[slot] {
                None => 0.0,
                Some(e) => {
                    let e = keep_edge[e];
                    if c < ew { g.edge_feats[e * ew + c] } else { offsets[e * 3 + c - ew] }
                }
            }
        });
        let xq = sess.graph.gather_rows(sources, &nb.queries())?;
        let xv = sess.graph.gather_rows(targets, &nb.key)?;
        let extra = sess.graph.constant(extra);
        let cat = sess.graph.concat(&[xq, xv, extra], 1)?;
        let m = self.message.forward(sess, cat)?;
        let m = sess.graph.relu(m);
        let m = sess.graph.reshape(m, &[n, w, hidden])?;
        let keep: Vec<bool> = (0..n * w * hidden).map(|x| nb.mask[x / hidden]).collect();
        let m = sess.graph.masked_fill(m, &keep)?;
        let pooled = sess.graph.max_axis(m, 1)?;
        let has = Tensor::from_fn(&[n, 1], |i| if nb.mask[i * w] { 1.0 } else { 0.0 });
        let has = sess.graph.constant(has);
        // rows without neighbours hold the fill value; zero them before the node map
        let pooled = sess.graph.mul(pooled, has)?;
        let out = self.node.forward(sess, pooled)?;
        let out = sess.graph.relu(out);
        let nodes = sess.graph.mul(out, has)?;
        Ok(CaConvOutput { nodes, skipped })
    }
}

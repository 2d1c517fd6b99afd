use super::egat::PaddedNeighbors;
use super::gat::NeighborLayout;
use super::{ModelConfig, Result};
use crate::featurize::{
    build_atom_graph, build_residue_graph, offset_class, AtomGraph, AtomGraphParams, RbfSpec, ResidueGraph,
    OFFSET_CLASSES,
};
use crate::container::Container;
use crate::structure::Structure;
use crate::tensor::Tensor;

pub const FEATURES_KIND: &str = "bindkit-features";

/// Width of the structural pair features for the default 16-bin RBF:
/// Cα–Cα RBF, offset one-hot, same-chain flag.
pub const PAIR_STRUCT_WIDTH: usize = 16 + OFFSET_CLASSES + 1;

/// Everything the network reads from one complex, precomputed once.
#[derive(Debug, Clone)]
pub struct ComplexInputs {
    pub n: usize,
    pub native: Vec<usize>,
    pub design_mask: Vec<bool>,
    pub chain_index: Vec<usize>,
    pub residue: ResidueGraph,
    pub atom: AtomGraph,
    pub residue_layout: NeighborLayout,
    /// (N·K)×edge width
    pub residue_edges: Tensor,
    pub atom_layout: PaddedNeighbors,
    /// M×71
    pub atom_nodes: Tensor,
    /// (N·width)×83, padded per centroid
    pub atom_edges: Tensor,
    /// (N·width)×1, squared centroid→atom distance over radius²
    pub atom_dist2: Tensor,
    /// (N·N)×pair width
    pub pair_struct: Tensor,
}

pub(crate) fn pair_struct_width(bins: usize) -> usize {
    bins + OFFSET_CLASSES + 1
}

impl ComplexInputs {
    pub fn build(s: &Structure, design_mask: &[bool], cfg: &ModelConfig) -> Result<Self> {
        let spec = RbfSpec::linear(cfg.rbf_bins, 2.0, 22.0);
        let n = s.n_residues();
        let k = cfg.k_neighbors.min(n.saturating_sub(1)).max(1);
        let residue = build_residue_graph(s, design_mask, &spec, k)?;
        let params = AtomGraphParams { radius: cfg.atom_radius, k_max: cfg.atom_k_max };
        let atom = build_atom_graph(s, design_mask, &spec, &params)?;

        let residue_layout = NeighborLayout::new(n, k, &residue.neighbor_index, &residue.edge_mask);
        let rw = residue.edge_width();
        let residue_edges = Tensor::new(vec![n * k, rw], residue.edge_features()).expect("edge feature size");

        let (atom_layout, slot_edge) = PaddedNeighbors::from_edges(n, &atom.edges);
        let atom_layout = PaddedNeighbors {
            key: atom_layout.key.iter().zip(&atom_layout.mask).map(|(&a, &m)| if m { a } else { 0 }).collect(),
            ..atom_layout
        };
        let aw = atom.edge_width();
        let flat = atom.edge_features();
        let atom_edges = Tensor::from_fn(&[n * atom_layout.width, aw], |x| match slot_edge[x / aw] {
            Some(e) => flat[e * aw + x % aw],
            None => 0.0,
        });
        let atom_dist2 = atom_layout.squared_distances(&atom.centroid_pos, &atom.atom_pos, cfg.atom_radius);
        let atom_nodes = Tensor::new(vec![atom.n_atoms, crate::featurize::ATOM_NODE_WIDTH], atom.node_features())
            .expect("atom feature size");

        let refs: Vec<(usize, usize)> = s.residues().map(|(c, r)| (c, r.index)).collect();
        let cas = &atom.centroid_pos;
        let pw = pair_struct_width(cfg.rbf_bins);
        let mut pair = vec![0.0; n * n * pw];
        for i in 0..n {
            for j in 0..n {
                let row = &mut pair[(i * n + j) * pw..(i * n + j + 1) * pw];
                spec.encode_into((cas[i] - cas[j]).norm(), &mut row[..cfg.rbf_bins]);
                let same = refs[i].0 == refs[j].0;
                row[cfg.rbf_bins + offset_class(same, refs[i].1, refs[j].1)] = 1.0;
                row[pw - 1] = if same { 1.0 } else { 0.0 };
            }
        }
        Ok(Self {
            n,
            native: residue.residue_type.clone(),
            design_mask: design_mask.to_vec(),
            chain_index: residue.chain_index.clone(),
            residue_layout,
            residue_edges,
            atom_layout,
            atom_nodes,
            atom_edges,
            atom_dist2,
            pair_struct: Tensor::new(vec![n * n, pw], pair).expect("pair feature size"),
            residue,
            atom,
        })
    }

    /// Feature dump: every precomputed tensor, with index arrays stored as
    /// floats. Neighbour indices are exact in f32 below 2^24 residues.
    pub fn to_container(&self, cfg: &ModelConfig) -> Container {
        let k = self.residue_layout.k;
        let ints = |v: &[usize]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let flags = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let mut c = Container::new(serde_json::json!({
            "kind": FEATURES_KIND,
            "residues": self.n,
            "k_neighbors": k,
            "atoms": self.atom.n_atoms,
            "atom_slots": self.atom_layout.width,
            "config": cfg,
        }));
        let n = self.n;
        let t = |shape: Vec<usize>, data: Vec<f64>| Tensor::new(shape, data).expect("feature shape");
        c.insert("native", t(vec![n], ints(&self.native)));
        c.insert("design_mask", t(vec![n], flags(&self.design_mask)));
        c.insert("chain_index", t(vec![n], ints(&self.chain_index)));
        c.insert("residue_neighbors", t(vec![n, k], ints(&self.residue_layout.index)));
        c.insert("residue_edge_mask", t(vec![n, k], flags(&self.residue_layout.mask)));
        c.insert("residue_edges", self.residue_edges.clone());
        c.insert("atom_nodes", self.atom_nodes.clone());
        c.insert("atom_neighbors", t(vec![n, self.atom_layout.width], ints(&self.atom_layout.key)));
        c.insert("atom_edge_mask", t(vec![n, self.atom_layout.width], flags(&self.atom_layout.mask)));
        c.insert("atom_edges", self.atom_edges.clone());
        c.insert("atom_dist2", self.atom_dist2.clone());
        c.insert("pair_struct", self.pair_struct.clone());
        c
    }

    pub fn design_positions(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.design_mask[i]).collect()
    }
}

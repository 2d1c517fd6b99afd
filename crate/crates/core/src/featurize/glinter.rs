//! Distance-cutoff residue and atom graphs for the frame-standardized
//! convolution. Node features are invariant; coordinates and frames are kept
//! separately and only enter the network after standardization.

use super::knn::Grid;
use super::residue_graph::residue_geometry;
use super::{FeatureError, LocalFrame};
use crate::geometry::Vec3;
use crate::residue::{atom_type, NUM_CANONICAL};
use crate::structure::Structure;
use serde::{Deserialize, Serialize};

/// Backbone CA, N, C, O then side-chain C, N, O, S, H.
pub const ATOM_CHEM_TYPES: usize = 10;
const AA_ONE_HOT: usize = NUM_CANONICAL + 1;
const PSSM_WIDTH: usize = 20;

/// Residue node width: AA one-hot (21), SASA, normalized position, PSSM (20).
pub const GLINTER_RESIDUE_WIDTH: usize = AA_ONE_HOT + 1 + 1 + PSSM_WIDTH;
/// Atom node width: chemical type (10), parent AA one-hot (21), atom SASA.
pub const GLINTER_ATOM_WIDTH: usize = ATOM_CHEM_TYPES + AA_ONE_HOT + 1;

/// Optional per-residue inputs computed by external tools.
#[derive(Debug, Clone, Default)]
pub struct GlinterInputs {
    pub residue_sasa: Option<Vec<f64>>,
    pub pssm: Option<Vec<[f64; PSSM_WIDTH]>>,
    pub atom_sasa: Option<Vec<f64>>,
}

/// Bipartite graph from frame-carrying source nodes to target nodes. For
/// the residue graph sources and targets are the same residues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlinterGraph {
    pub n_sources: usize,
    pub source_width: usize,
    pub source_feats: Vec<f64>,
    pub source_pos: Vec<Vec3>,
    /// `None` where the backbone frame is unavailable or degenerate.
    pub source_frames: Vec<Option<LocalFrame>>,
    pub n_targets: usize,
    pub target_width: usize,
    pub target_feats: Vec<f64>,
    pub target_pos: Vec<Vec3>,
    /// (source, target) pairs grouped by source, nearest first.
    pub edges: Vec<(usize, usize)>,
    pub edge_width: usize,
    pub edge_feats: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlinterGraphs {
    pub residue: GlinterGraph,
    pub atom: GlinterGraph,
}

fn chem_type(name: &str, element: &str) -> Option<usize> {
    match name {
        "CA" => return Some(0),
        "N" => return Some(1),
        "C" => return Some(2),
        "O" => return Some(3),
        "CB" => return Some(4),
        _ => {}
    }
    match element {
        "C" => Some(5),
        "N" => Some(6),
        "O" => Some(7),
        "S" | "SE" => Some(8),
        "H" => Some(9),
        _ => None,
    }
}

pub fn build_glinter_graphs(
    s: &Structure,
    d_res: f64,
    d_atom: f64,
    inputs: &GlinterInputs,
) -> Result<GlinterGraphs, FeatureError> {
    let geom = residue_geometry(s)?;
    let n = geom.len();
    let chain_len: Vec<usize> = s.chains.iter().map(|c| c.len()).collect();
    let mut res_feats = vec![0.0; n * GLINTER_RESIDUE_WIDTH];
    let aa: Vec<usize> = s.residues().map(|(_, r)| r.aa.index()).collect();
    for (i, g) in geom.iter().enumerate() {
        let row = &mut res_feats[i * GLINTER_RESIDUE_WIDTH..(i + 1) * GLINTER_RESIDUE_WIDTH];
        row[aa[i]] = 1.0;
        row[AA_ONE_HOT] = inputs.residue_sasa.as_ref().map_or(0.0, |v| v[i]);
        row[AA_ONE_HOT + 1] = g.index as f64 / chain_len[g.chain] as f64;
        if let Some(p) = &inputs.pssm {
            row[AA_ONE_HOT + 2..].copy_from_slice(&p[i]);
        }
    }
    let ca: Vec<Vec3> = geom.iter().map(|g| g.ca).collect();
    let frames: Vec<Option<LocalFrame>> = geom.iter().map(|g| g.frame).collect();

    let grid = Grid::new(&ca, d_res.max(1.0));
    let mut res_edges = Vec::new();
    for (i, p) in ca.iter().enumerate() {
        for (j, _) in grid.within(p, d_res) {
            if j != i {
                res_edges.push((i, j));
            }
        }
    }
    let residue = GlinterGraph {
        n_sources: n,
        source_width: GLINTER_RESIDUE_WIDTH,
        source_feats: res_feats.clone(),
        source_pos: ca.clone(),
        source_frames: frames.clone(),
        n_targets: n,
        target_width: GLINTER_RESIDUE_WIDTH,
        target_feats: res_feats.clone(),
        target_pos: ca.clone(),
        edges: res_edges,
        edge_width: 0,
        edge_feats: vec![],
    };

    let mut atom_feats = Vec::new();
    let mut atom_pos = Vec::new();
    let mut atom_owner = Vec::new();
    for (gi, (_, r)) in s.residues().enumerate() {
        for a in r.atoms.iter().filter(|a| a.resolved) {
            let mut row = vec![0.0; GLINTER_ATOM_WIDTH];
            if let Some(t) = chem_type(&a.name, &a.element) {
                row[t] = 1.0;
            } else if atom_type(&a.name) < crate::residue::UNK_ATOM {
                row[5] = 1.0;
            }
            row[ATOM_CHEM_TYPES + aa[gi]] = 1.0;
            let k = atom_owner.len();
            row[GLINTER_ATOM_WIDTH - 1] = inputs.atom_sasa.as_ref().map_or(0.0, |v| v[k]);
            atom_feats.extend(row);
            atom_pos.push(a.pos);
            atom_owner.push(gi);
        }
    }
    let agrid = Grid::new(&atom_pos, d_atom.max(1.0));
    let mut atom_edges = Vec::new();
    let mut atom_edge_feats = Vec::new();
    for (i, p) in ca.iter().enumerate() {
        for (a, _) in agrid.within(p, d_atom) {
            atom_edges.push((i, a));
            atom_edge_feats.push(if atom_owner[a] == i { 1.0 } else { 0.0 });
        }
    }
    let atom = GlinterGraph {
        n_sources: n,
        source_width: GLINTER_RESIDUE_WIDTH,
        source_feats: res_feats,
        source_pos: ca,
        source_frames: frames,
        n_targets: atom_pos.len(),
        target_width: GLINTER_ATOM_WIDTH,
        target_feats: atom_feats,
        target_pos: atom_pos,
        edges: atom_edges,
        edge_width: 1,
        edge_feats: atom_edge_feats,
    };
    Ok(GlinterGraphs { residue, atom })
}

impl GlinterGraph {
    /// Target positions of every edge in the source frame (E×3); zeros where
    /// the source frame is unavailable.
    pub fn standardized_offsets(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.edges.len() * 3);
        for &(q, v) in &self.edges {
            match &self.source_frames[q] {
                Some(f) => out.extend_from_slice(f.to_local(&self.target_pos[v]).as_slice()),
                None => out.extend_from_slice(&[0.0; 3]),
            }
        }
        out
    }
}

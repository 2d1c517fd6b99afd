//! Residue k-NN graphs and atom radius graphs with rigid-motion invariant
//! edge and node features, plus the distance-cutoff graphs consumed by the
//! frame-standardized convolution.

mod atom_graph;
mod frame;
mod glinter;
pub mod knn;
mod residue_graph;

pub use atom_graph::{build_atom_graph, AtomGraph, AtomGraphParams, ATOM_EDGE_WIDTH, ATOM_NODE_WIDTH};
pub use frame::{local_frame, LocalFrame};
pub use glinter::{build_glinter_graphs, GlinterGraph, GlinterGraphs, GlinterInputs, ATOM_CHEM_TYPES};
pub use residue_graph::{build_residue_graph, ResidueGraph, CORE_ATOMS, RESIDUE_EDGE_WIDTH};

use crate::structure::StructureError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset classes: 0..=64 for clamped same-chain offsets in [-32, 32];
/// cross-chain pairs use class 64.
pub const OFFSET_CLASSES: usize = 65;
pub const MAX_OFFSET: i64 = 32;
pub const CROSS_CHAIN_CLASS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("degenerate backbone frame at residue {residue} (collinear N, CA, C)")]
    DegenerateFrame { residue: i32 },
    #[error("graph needs at least 2 residues, got {0}")]
    GraphTooSmall(usize),
    #[error("residue {residue} of chain {chain} has no CA atom")]
    MissingCa { chain: String, residue: i32 },
    #[error("design mask has {got} entries for {expected} residues")]
    MaskLength { expected: usize, got: usize },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Gaussian radial basis `exp(-(d - μ_i)^2)` with linearly spaced centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSpec {
    pub centers: Vec<f64>,
}

impl Default for RbfSpec {
    fn default() -> Self {
        Self::linear(16, 2.0, 22.0)
    }
}

impl RbfSpec {
    pub fn linear(n_bins: usize, lo: f64, hi: f64) -> Self {
        let step = if n_bins > 1 { (hi - lo) / (n_bins - 1) as f64 } else { 0.0 };
        Self { centers: (0..n_bins).map(|i| lo + step * i as f64).collect() }
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    /// Writes the encoding of `d` into `out`. Infinite distances (missing
    /// atoms) encode as all zeros.
    pub fn encode_into(&self, d: f64, out: &mut [f64]) {
        for (o, mu) in out.iter_mut().zip(&self.centers) {
            *o = if d.is_finite() { (-(d - mu) * (d - mu)).exp() } else { 0.0 };
        }
    }

    pub fn encode(&self, d: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bins()];
        self.encode_into(d, &mut out);
        out
    }
}

pub(crate) fn offset_class(same_chain: bool, i: usize, j: usize) -> usize {
    if !same_chain {
        return CROSS_CHAIN_CLASS;
    }
    let off = (j as i64 - i as i64).clamp(-MAX_OFFSET, MAX_OFFSET);
    (off + MAX_OFFSET) as usize
}

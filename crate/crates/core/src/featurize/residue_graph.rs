use super::knn::knn_all;
use super::{offset_class, FeatureError, LocalFrame, RbfSpec, OFFSET_CLASSES};
use crate::geometry::Vec3;
use crate::residue::{sidechain_slot, SIDECHAIN_SLOTS};
use crate::structure::{pseudo_cbeta_from, ChainRole, Structure};
use serde::{Deserialize, Serialize};

/// Core atoms per residue: N, CA, C, O, pseudo-CB.
pub const CORE_ATOMS: usize = 5;

/// Flattened per-edge width for the default 16-bin RBF:
/// C²D + C² + 65 + 1 + 3C + 32D.
pub const RESIDUE_EDGE_WIDTH: usize =
    CORE_ATOMS * CORE_ATOMS * 16 + CORE_ATOMS * CORE_ATOMS + OFFSET_CLASSES + 1 + 3 * CORE_ATOMS + SIDECHAIN_SLOTS * 16;

/// k-NN residue graph over Cα. Rows are padded to `k` with sentinel index
/// `n_residues` and `edge_mask = false`; padded entries carry zero features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueGraph {
    pub n_residues: usize,
    pub k: usize,
    pub n_bins: usize,
    pub neighbor_index: Vec<usize>,
    pub edge_mask: Vec<bool>,
    /// N×K×C²×D
    pub core_rbf: Vec<f64>,
    /// N×K×C², `(1 + d)^-1`
    pub core_inv_dist: Vec<f64>,
    /// N×K offset class in 0..65
    pub rel_index: Vec<usize>,
    /// N×K
    pub same_chain: Vec<f64>,
    /// N×K×3C, neighbour core atoms in the source residue's frame
    pub frame_pos: Vec<f64>,
    /// N×K×32×D, source pseudo-Cβ to neighbour side-chain atoms
    pub cb_sidechain_rbf: Vec<f64>,
    pub residue_type: Vec<usize>,
    pub chain_index: Vec<usize>,
    pub chain_role: Vec<ChainRole>,
    pub design_mask: Vec<bool>,
}

pub(crate) struct ResidueGeom {
    pub core: [Option<Vec3>; CORE_ATOMS],
    pub frame: Option<LocalFrame>,
    pub sidechain: [Option<Vec3>; SIDECHAIN_SLOTS],
    pub chain: usize,
    pub index: usize,
    pub ca: Vec3,
}

pub(crate) fn residue_geometry(s: &Structure) -> Result<Vec<ResidueGeom>, FeatureError> {
    s.residues()
        .map(|(ci, r)| {
            let ca = r.ca().ok_or_else(|| FeatureError::MissingCa { chain: s.chains[ci].id.clone(), residue: r.seq_id })?;
            let (n, c, o) = (r.pos("N"), r.pos("C"), r.pos("O"));
            let (cb, frame) = match (n, c) {
                (Some(n), Some(c)) => {
                    (Some(pseudo_cbeta_from(&n, &ca, &c)), LocalFrame::from_backbone(&n, &ca, &c, r.seq_id).ok())
                }
                _ => (None, None),
            };
            let mut sidechain = [None; SIDECHAIN_SLOTS];
            for a in r.atoms.iter().filter(|a| a.resolved) {
                if let Some(slot) = sidechain_slot(&a.name) {
                    sidechain[slot] = Some(a.pos);
                }
            }
            Ok(ResidueGeom { core: [n, Some(ca), c, o, cb], frame, sidechain, chain: ci, index: r.index, ca })
        })
        .collect()
}

fn dist(a: Option<Vec3>, b: Option<Vec3>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).norm(),
        _ => f64::INFINITY,
    }
}

pub fn build_residue_graph(
    s: &Structure,
    design_mask: &[bool],
    spec: &RbfSpec,
    k: usize,
) -> Result<ResidueGraph, FeatureError> {
    let geom = residue_geometry(s)?;
    let n = geom.len();
    if n < 2 {
        return Err(FeatureError::GraphTooSmall(n));
    }
    if design_mask.len() != n {
        return Err(FeatureError::MaskLength { expected: n, got: design_mask.len() });
    }
    let d = spec.n_bins();
    let cc = CORE_ATOMS * CORE_ATOMS;
    let ne = n * k;
    let mut g = ResidueGraph {
        n_residues: n,
        k,
        n_bins: d,
        neighbor_index: vec![n; ne],
        edge_mask: vec![false; ne],
        core_rbf: vec![0.0; ne * cc * d],
        core_inv_dist: vec![0.0; ne * cc],
        rel_index: vec![0; ne],
        same_chain: vec![0.0; ne],
        frame_pos: vec![0.0; ne * 3 * CORE_ATOMS],
        cb_sidechain_rbf: vec![0.0; ne * SIDECHAIN_SLOTS * d],
        residue_type: s.residues().map(|(_, r)| r.aa.index()).collect(),
        chain_index: geom.iter().map(|g| g.chain).collect(),
        chain_role: s.residues().map(|(ci, _)| s.chains[ci].role).collect(),
        design_mask: design_mask.to_vec(),
    };
    let cas: Vec<Vec3> = geom.iter().map(|g| g.ca).collect();
    let neighbors = knn_all(&cas, k);
    for (i, row) in neighbors.iter().enumerate() {
        let src = &geom[i];
        for (slot, &(j, _)) in row.iter().enumerate() {
            let e = i * k + slot;
            let dst = &geom[j];
            g.neighbor_index[e] = j;
            g.edge_mask[e] = true;
            let same = src.chain == dst.chain;
            g.same_chain[e] = if same { 1.0 } else { 0.0 };
            g.rel_index[e] = offset_class(same, src.index, dst.index);
            for a in 0..CORE_ATOMS {
                for b in 0..CORE_ATOMS {
                    let dd = dist(src.core[a], dst.core[b]);
                    let p = e * cc + a * CORE_ATOMS + b;
                    g.core_inv_dist[p] = if dd.is_finite() { 1.0 / (1.0 + dd) } else { 0.0 };
                    spec.encode_into(dd, &mut g.core_rbf[p * d..(p + 1) * d]);
                }
            }
            if let Some(frame) = &src.frame {
                for b in 0..CORE_ATOMS {
                    if let Some(p) = dst.core[b] {
                        let local = frame.to_local(&p);
                        let o = (e * CORE_ATOMS + b) * 3;
                        g.frame_pos[o..o + 3].copy_from_slice(local.as_slice());
                    }
                }
            }
            if !design_mask[j] {
                for (slot_sc, pos) in dst.sidechain.iter().enumerate() {
                    let dd = dist(src.core[4], *pos);
                    let o = (e * SIDECHAIN_SLOTS + slot_sc) * d;
                    spec.encode_into(dd, &mut g.cb_sidechain_rbf[o..o + d]);
                }
            }
        }
    }
    Ok(g)
}

impl ResidueGraph {
    pub fn edge_width(&self) -> usize {
        let cc = CORE_ATOMS * CORE_ATOMS;
        cc * self.n_bins + cc + OFFSET_CLASSES + 1 + 3 * CORE_ATOMS + SIDECHAIN_SLOTS * self.n_bins
    }

    /// Neighbour `slot` of residue `i`, or `None` for padding.
    pub fn neighbor(&self, i: usize, slot: usize) -> Option<usize> {
        let e = i * self.k + slot;
        self.edge_mask[e].then_some(self.neighbor_index[e])
    }

    /// All edge features concatenated per edge (offset one-hot expanded):
    /// core RBF, inverse distance, offset one-hot, same-chain, frame
    /// positions, Cβ–side-chain RBF. Shape N×K×`edge_width()`.
    pub fn edge_features(&self) -> Vec<f64> {
        let w = self.edge_width();
        let cc = CORE_ATOMS * CORE_ATOMS;
        let d = self.n_bins;
        let ne = self.n_residues * self.k;
        let mut out = vec![0.0; ne * w];
        for e in 0..ne {
            if !self.edge_mask[e] {
                continue;
            }
            let row = &mut out[e * w..(e + 1) * w];
            let mut o = 0;
            row[o..o + cc * d].copy_from_slice(&self.core_rbf[e * cc * d..(e + 1) * cc * d]);
            o += cc * d;
            row[o..o + cc].copy_from_slice(&self.core_inv_dist[e * cc..(e + 1) * cc]);
            o += cc;
            row[o + self.rel_index[e]] = 1.0;
            o += OFFSET_CLASSES;
            row[o] = self.same_chain[e];
            o += 1;
            row[o..o + 3 * CORE_ATOMS].copy_from_slice(&self.frame_pos[e * 3 * CORE_ATOMS..(e + 1) * 3 * CORE_ATOMS]);
            o += 3 * CORE_ATOMS;
            let sc = SIDECHAIN_SLOTS * d;
            row[o..o + sc].copy_from_slice(&self.cb_sidechain_rbf[e * sc..(e + 1) * sc]);
        }
        out
    }
}

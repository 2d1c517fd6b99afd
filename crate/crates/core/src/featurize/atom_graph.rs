use super::knn::Grid;
use super::{offset_class, FeatureError, RbfSpec, OFFSET_CLASSES};
use crate::geometry::Vec3;
use crate::residue::{atom_type, is_backbone, AminoAcid, ATOM_VOCAB, MASK_TOKEN, RESIDUE_VOCAB};
use crate::structure::Structure;
use serde::{Deserialize, Serialize};

pub const ATOM_NODE_WIDTH: usize = ATOM_VOCAB + RESIDUE_VOCAB + 1;
/// RBF (16) + distance + offset one-hot + same-chain.
pub const ATOM_EDGE_WIDTH: usize = 16 + 1 + OFFSET_CLASSES + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomGraphParams {
    pub radius: f64,
    pub k_max: usize,
}

impl Default for AtomGraphParams {
    fn default() -> Self {
        Self { radius: 15.0, k_max: 96 }
    }
}

/// Radius graph from residue Cα centroids to heavy atoms.
///
/// Each residue contributes its roster atoms (present or not) plus any extra
/// resolved atoms; design-masked residues contribute backbone atoms only.
/// Missing atoms keep their type one-hots, get `exists = false`, zero
/// coordinates and no edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGraph {
    pub n_centroids: usize,
    pub n_atoms: usize,
    pub n_bins: usize,
    pub atom_type: Vec<usize>,
    pub residue_type: Vec<usize>,
    pub exists: Vec<bool>,
    /// Global residue index owning each atom.
    pub atom_residue: Vec<usize>,
    /// (centroid, atom) pairs grouped by centroid, nearest first.
    pub edges: Vec<(usize, usize)>,
    pub edge_rbf: Vec<f64>,
    pub edge_dist: Vec<f64>,
    pub edge_offset: Vec<usize>,
    pub edge_same_chain: Vec<f64>,
    pub centroid_pos: Vec<Vec3>,
    pub atom_pos: Vec<Vec3>,
}

pub fn build_atom_graph(
    s: &Structure,
    design_mask: &[bool],
    spec: &RbfSpec,
    params: &AtomGraphParams,
) -> Result<AtomGraph, FeatureError> {
    let n = s.n_residues();
    if design_mask.len() != n {
        return Err(FeatureError::MaskLength { expected: n, got: design_mask.len() });
    }
    let mut centroid_pos = Vec::with_capacity(n);
    let mut res_chain = Vec::with_capacity(n);
    let mut res_index = Vec::with_capacity(n);
    let mut g = AtomGraph {
        n_centroids: n,
        n_atoms: 0,
        n_bins: spec.n_bins(),
        atom_type: vec![],
        residue_type: vec![],
        exists: vec![],
        atom_residue: vec![],
        edges: vec![],
        edge_rbf: vec![],
        edge_dist: vec![],
        edge_offset: vec![],
        edge_same_chain: vec![],
        centroid_pos: vec![],
        atom_pos: vec![],
    };
    for (gi, (ci, r)) in s.residues().enumerate() {
        let ca = r.ca().ok_or_else(|| FeatureError::MissingCa { chain: s.chains[ci].id.clone(), residue: r.seq_id })?;
        centroid_pos.push(ca);
        res_chain.push(ci);
        res_index.push(r.index);
        let masked = design_mask[gi];
        let rtype = if masked { MASK_TOKEN } else { r.aa.index() };
        let mut push = |name: &str, pos: Option<Vec3>| {
            g.atom_type.push(atom_type(name));
            g.residue_type.push(rtype);
            g.exists.push(pos.is_some());
            g.atom_residue.push(gi);
            g.atom_pos.push(pos.unwrap_or_else(Vec3::zeros));
        };
        let roster: &[&str] = if r.aa == AminoAcid::Unk { &[] } else { r.aa.heavy_atoms() };
        for name in roster.iter().filter(|nm| !masked || is_backbone(nm)) {
            push(name, r.pos(name));
        }
        for a in r.atoms.iter().filter(|a| a.resolved && !roster.contains(&a.name.as_str())) {
            if !masked || is_backbone(&a.name) {
                push(&a.name, Some(a.pos));
            }
        }
    }
    g.n_atoms = g.atom_type.len();
    let present: Vec<usize> = (0..g.n_atoms).filter(|&a| g.exists[a]).collect();
    let present_pos: Vec<Vec3> = present.iter().map(|&a| g.atom_pos[a]).collect();
    let grid = Grid::new(&present_pos, params.radius.max(1.0));
    let d = spec.n_bins();
    for (c, ca) in centroid_pos.iter().enumerate() {
        let mut hits: Vec<(usize, f64)> =
            grid.within(ca, params.radius).into_iter().map(|(p, d2)| (present[p], d2)).collect();
        // `within` sorts by compact index, which preserves atom order.
        hits.truncate(params.k_max);
        for (a, d2) in hits {
            let dist = d2.sqrt();
            let owner = g.atom_residue[a];
            let same = res_chain[owner] == res_chain[c];
            g.edges.push((c, a));
            g.edge_dist.push(dist);
            let start = g.edge_rbf.len();
            g.edge_rbf.resize(start + d, 0.0);
            spec.encode_into(dist, &mut g.edge_rbf[start..]);
            g.edge_offset.push(offset_class(same, res_index[c], res_index[owner]));
            g.edge_same_chain.push(if same { 1.0 } else { 0.0 });
        }
    }
    g.centroid_pos = centroid_pos;
    Ok(g)
}

/// Padded per-centroid neighbour layout for attention.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedEdges {
    pub width: usize,
    /// N×width atom indices (0 for padding).
    pub atom: Vec<usize>,
    /// N×width edge ids.
    pub edge: Vec<Option<usize>>,
    pub mask: Vec<bool>,
}

impl AtomGraph {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, centroid: usize) -> usize {
        self.edges.iter().filter(|(c, _)| *c == centroid).count()
    }

    /// M×71: atom type one-hot, residue type one-hot, exists flag.
    pub fn node_features(&self) -> Vec<f64> {
        let w = ATOM_NODE_WIDTH;
        let mut out = vec![0.0; self.n_atoms * w];
        for a in 0..self.n_atoms {
            let row = &mut out[a * w..(a + 1) * w];
            row[self.atom_type[a]] = 1.0;
            row[ATOM_VOCAB + self.residue_type[a]] = 1.0;
            row[w - 1] = if self.exists[a] { 1.0 } else { 0.0 };
        }
        out
    }

    pub fn edge_width(&self) -> usize {
        self.n_bins + 1 + OFFSET_CLASSES + 1
    }

    /// E×edge_width: RBF, distance, offset one-hot, same-chain.
    pub fn edge_features(&self) -> Vec<f64> {
        let w = self.edge_width();
        let d = self.n_bins;
        let mut out = vec![0.0; self.n_edges() * w];
        for e in 0..self.n_edges() {
            let row = &mut out[e * w..(e + 1) * w];
            row[..d].copy_from_slice(&self.edge_rbf[e * d..(e + 1) * d]);
            row[d] = self.edge_dist[e];
            row[d + 1 + self.edge_offset[e]] = 1.0;
            row[w - 1] = self.edge_same_chain[e];
        }
        out
    }

    pub fn padded(&self) -> PaddedEdges {
        let n = self.n_centroids;
        let mut counts = vec![0usize; n];
        for (c, _) in &self.edges {
            counts[*c] += 1;
        }
        let width = counts.iter().copied().max().unwrap_or(0).max(1);
        let mut p = PaddedEdges { width, atom: vec![0; n * width], edge: vec![None; n * width], mask: vec![false; n * width] };
        let mut fill = vec![0usize; n];
        for (e, &(c, a)) in self.edges.iter().enumerate() {
            let slot = c * width + fill[c];
            fill[c] += 1;
            p.atom[slot] = a;
            p.edge[slot] = Some(e);
            p.mask[slot] = true;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::is_backbone;
    use crate::synth;

    #[test]
    fn masked_residues_expose_backbone_only() {
        let s = synth::helix_dimer("LLLLLLLLLL", "WWWWWWWWWW", 9.0);
        let mask: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let g = build_atom_graph(&s, &mask, &RbfSpec::default(), &AtomGraphParams::default()).unwrap();
        for &(_, a) in &g.edges {
            if mask[g.atom_residue[a]] {
                assert!(is_backbone(crate::residue::ATOM_NAMES[g.atom_type[a]]));
                assert_eq!(g.residue_type[a], MASK_TOKEN);
            }
        }
        assert!(g.edge_dist.iter().all(|&d| d <= 15.0));
        for c in 0..g.n_centroids {
            assert!(g.degree(c) <= 96);
        }
        let nf = g.node_features();
        for a in 0..g.n_atoms {
            let row = &nf[a * ATOM_NODE_WIDTH..(a + 1) * ATOM_NODE_WIDTH];
            assert_eq!(row[..ATOM_VOCAB].iter().sum::<f64>(), 1.0);
            assert_eq!(row[ATOM_VOCAB..ATOM_VOCAB + RESIDUE_VOCAB].iter().sum::<f64>(), 1.0);
        }
        assert_eq!(g.edge_width(), ATOM_EDGE_WIDTH);
    }

    #[test]
    fn missing_atoms_flagged() {
        let mut s = synth::helix_dimer("LLLL", "KKKK", 30.0);
        s.chains[0].residues[1].atoms.retain(|a| a.name != "CD1");
        let g = build_atom_graph(&s, &[false; 8], &RbfSpec::default(), &AtomGraphParams::default()).unwrap();
        let missing: Vec<usize> = (0..g.n_atoms).filter(|&a| !g.exists[a]).collect();
        assert_eq!(missing.len(), 1);
        assert_eq!(g.atom_pos[missing[0]], Vec3::zeros());
        assert!(g.edges.iter().all(|&(_, a)| a != missing[0]));
    }

    #[test]
    fn isolated_residue_sees_only_itself() {
        let mut s = synth::helix_dimer("A", "G", 40.0);
        s.chains.truncate(2);
        let g = build_atom_graph(&s, &[false, false], &RbfSpec::default(), &AtomGraphParams::default()).unwrap();
        for &(c, a) in &g.edges {
            assert_eq!(g.atom_residue[a], c);
        }
        assert_eq!(g.degree(0), 5);
        assert_eq!(g.degree(1), 4);
    }
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::MsaError;
use crate::container::Container;
use crate::tensor::Tensor;

pub const ATTENTION_KIND: &str = "bindkit-attention";
const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Column-attention maps `A[l, h, c]`, each N×N over MSA rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    pub layers: usize,
    pub heads: usize,
    pub columns: usize,
    pub rows: usize,
    /// Row-major [layers, heads, columns, rows, rows].
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

impl AttentionStack {
    pub fn new(layers: usize, heads: usize, columns: usize, rows: usize, data: Vec<f64>) -> Result<Self, MsaError> {
        let want = layers * heads * columns * rows * rows;
        if data.len() != want {
            return Err(MsaError::Shape(format!("{} values for {layers}x{heads}x{columns}x{rows}x{rows}", data.len())));
        }
        Ok(Self { layers, heads, columns, rows, data })
    }

    /// Stack of explicit matrices, one layer and head per matrix.
    pub fn from_matrices(mats: &[DMatrix<f64>]) -> Result<Self, MsaError> {
        let n = mats.first().map_or(0, |m| m.nrows());
        let mut data = Vec::with_capacity(mats.len() * n * n);
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(MsaError::Shape(format!("matrix {i} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
            }
            for r in 0..n {
                data.extend(m.row(r).iter());
            }
        }
        Self::new(1, 1, mats.len(), n, data)
    }

    pub fn n_maps(&self) -> usize {
        self.layers * self.heads * self.columns
    }

    pub fn map(&self, k: usize) -> DMatrix<f64> {
        let n = self.rows;
        DMatrix::from_row_slice(n, n, &self.data[k * n * n..(k + 1) * n * n])
    }

    /// Rows whose sum is off by more than 1e-4, as (map, row) pairs.
    pub fn non_stochastic_rows(&self) -> Vec<(usize, usize)> {
        let n = self.rows;
        let mut bad = Vec::new();
        for k in 0..self.n_maps() {
            for r in 0..n {
                let start = (k * n + r) * n;
                let s: f64 = self.data[start..start + n].iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                    bad.push((k, r));
                }
            }
        }
        bad
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(json!({
            "kind": ATTENTION_KIND,
            "layers": self.layers,
            "heads": self.heads,
            "columns": self.columns,
            "rows": self.rows,
            "index": ["layer", "head", "column", "query_row", "key_row"],
        }));
        let shape = vec![self.layers, self.heads, self.columns, self.rows, self.rows];
        c.insert("attention", Tensor::new(shape, self.data.clone()).expect("shape matches data"));
        c
    }

    /// Loads a stack, logging a warning if any attention row is not
    /// normalized.
    pub fn from_container(c: &Container) -> Result<Self, MsaError> {
        if c.meta.get("kind").and_then(|k| k.as_str()) != Some(ATTENTION_KIND) {
            return Err(MsaError::Shape(format!("container kind is not {ATTENTION_KIND}")));
        }
        let t = c.get("attention")?;
        let s = t.shape();
        if s.len() != 5 || s[3] != s[4] {
            return Err(MsaError::Shape(format!("attention tensor has shape {s:?}")));
        }
        let stack = Self::new(s[0], s[1], s[2], s[3], t.data().to_vec())?;
        let bad = stack.non_stochastic_rows();
        if !bad.is_empty() {
            log::warn!("{} attention rows are not row-stochastic within {ROW_SUM_TOLERANCE}", bad.len());
        }
        Ok(stack)
    }
}

/// `S = AGG over (l, h, c) of (A + Aᵀ)`; symmetric by construction.
pub fn similarity_from_attention(stack: &AttentionStack, agg: Aggregation) -> DMatrix<f64> {
    let n = stack.rows;
    let mut s = DMatrix::zeros(n, n);
    for k in 0..stack.n_maps() {
        let a = stack.map(k);
        s += &a + a.transpose();
    }
    if agg == Aggregation::Mean && stack.n_maps() > 0 {
        s /= stack.n_maps() as f64;
    }
    s
}

/// Similarity of every hit (rows 1..N) to the query, excluding the
/// query's own entry.
pub fn query_similarities(s: &DMatrix<f64>) -> Vec<f64> {
    s.row(0).iter().skip(1).copied().collect()
}

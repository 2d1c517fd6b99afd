use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Graph, Result, Tensor, Var};

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        let (idx, _) = self.tensors.insert_full(name.into(), t);
        ParamId(idx)
    }

    /// Glorot-uniform weight of shape `[fan_in, fan_out]`.
    pub fn add_glorot(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let t = Tensor::from_fn(&[fan_in, fan_out], |_| dist.sample(rng));
        self.add(name, t)
    }

    pub fn add_normal(&mut self, name: impl Into<String>, shape: &[usize], std: f64, rng: &mut impl Rng) -> ParamId {
        let dist = Normal::new(0.0, std).expect("valid std");
        let t = Tensor::from_fn(shape, |_| dist.sample(rng));
        self.add(name, t)
    }

    pub fn add_const(&mut self, name: impl Into<String>, shape: &[usize], v: f64) -> ParamId {
        self.add(name, Tensor::full(shape, v))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.tensors.get_index(id.0).map(|(k, _)| k.as_str()).unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Replaces every tensor whose name and shape match an entry of `other`.
    /// Returns the names that were missing or mismatched.
    pub fn load_from(&mut self, other: &ParamStore) -> Vec<String> {
        let mut bad = Vec::new();
        for (name, t) in self.tensors.iter_mut() {
            match other.tensors.get(name) {
                Some(src) if src.shape() == t.shape() => *t = src.clone(),
                _ => bad.push(name.clone()),
            }
        }
        bad
    }
}

/// A graph plus read access to the parameters it binds.
pub struct Session<'a> {
    pub graph: Graph,
    pub params: &'a ParamStore,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a ParamStore, graph: Graph) -> Self {
        Self { graph, params }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.graph.bind_param(id.0, self.params.get(id))
    }

    /// Runs the reverse pass and collects gradients of every bound parameter.
    pub fn param_grads(&mut self, loss: Var) -> Result<Vec<(ParamId, Tensor)>> {
        self.graph.backward(loss)?;
        let mut out: Vec<(ParamId, Tensor)> = self
            .graph
            .bound_params()
            .map(|(k, v)| (ParamId(k), self.graph.grad(v).unwrap_or_else(|| Tensor::zeros(self.params.get(ParamId(k)).shape()))))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        Ok(out)
    }
}

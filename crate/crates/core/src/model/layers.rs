use rand::Rng;

use crate::tensor::{ParamId, ParamStore, Result, Session, Var};

/// Standard deviation and bias for sigmoid gate projections; sigmoid(-3) ≈ 0.047.
pub const GATE_STD: f64 = 1e-4;
pub const GATE_BIAS: f64 = -3.0;

/// Affine map over the last axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add_glorot(format!("{name}.weight"), d_in, d_out, rng);
        let bias = Some(store.add_const(format!("{name}.bias"), &[d_out], 0.0));
        Self { weight, bias, d_in, d_out }
    }

    pub fn no_bias(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add_glorot(format!("{name}.weight"), d_in, d_out, rng);
        Self { weight, bias: None, d_in, d_out }
    }

    /// Gate projection starting close to closed.
    pub fn gate(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add_normal(format!("{name}.weight"), &[d_in, d_out], GATE_STD, rng);
        let bias = Some(store.add_const(format!("{name}.bias"), &[d_out], GATE_BIAS));
        Self { weight, bias, d_in, d_out }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        let rows = shape.iter().product::<usize>() / self.d_in.max(1);
        let flat = if shape.len() == 2 { x } else { s.graph.reshape(x, &[rows, self.d_in])? };
        let w = s.param(self.weight);
        let mut y = s.graph.matmul(flat, w)?;
        if let Some(b) = self.bias {
            let b = s.param(b);
            y = s.graph.add(y, b)?;
        }
        if shape.len() == 2 {
            return Ok(y);
        }
        let mut out = shape;
        *out.last_mut().expect("non-empty shape") = self.d_out;
        s.graph.reshape(y, &out)
    }
}

/// Two affine maps with a ReLU between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub out: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.0"), d_in, d_hidden, rng),
            out: Linear::new(store, &format!("{name}.1"), d_hidden, d_out, rng),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let h = self.hidden.forward(s, x)?;
        let h = s.graph.relu(h);
        self.out.forward(s, h)
    }
}

#![allow(dead_code)]

use bindkit::tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
/// Denominator floor for relative error, so near-zero gradients compare absolutely.
pub const FLOOR: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Max relative error between backprop and central differences of the
/// scalar produced by `f` with respect to every element of every input.
pub fn grad_check(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = f(&mut g, &vars);
    g.backward(loss).expect("scalar loss");
    let analytic: Vec<Tensor> =
        vars.iter().zip(inputs).map(|(v, t)| g.grad(*v).unwrap_or_else(|| Tensor::zeros(t.shape()))).collect();

    let eval = |ins: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let l = f(&mut g, &vars);
        g.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        for e in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic[k].data()[e], numeric));
        }
    }
    worst
}

/// Contracts `out` with fixed pseudo-random weights so every output
/// direction contributes to the scalar.
pub fn probe(g: &mut Graph, out: Var, seed: u64) -> Var {
    let mut r = rng(seed ^ 0x5eed);
    let w = randn(g.shape(out), &mut r);
    let w = g.constant(w);
    let p = g.mul(out, w).unwrap();
    g.sum_all(p)
}

use bindkit::tensor::{ParamId, ParamStore, Session};

/// Like [`grad_check`] but also differentiates every parameter in `store`.
/// With `sample = Some(m)`, only `m` evenly spaced elements per parameter
/// tensor are perturbed.
pub fn grad_check_params(
    store: &ParamStore,
    inputs: &[Tensor],
    sample: Option<usize>,
    f: impl Fn(&mut Session, &[Var]) -> Var,
) -> f64 {
    let mut sess = Session::new(store, Graph::new());
    let vars: Vec<Var> = inputs.iter().map(|t| sess.graph.leaf(t.clone(), true)).collect();
    let loss = f(&mut sess, &vars);
    let pgrads = sess.param_grads(loss).expect("scalar loss");
    let igrads: Vec<Tensor> =
        vars.iter().zip(inputs).map(|(v, t)| sess.graph.grad(*v).unwrap_or_else(|| Tensor::zeros(t.shape()))).collect();

    let eval = |st: &ParamStore, ins: &[Tensor]| -> f64 {
        let mut s = Session::new(st, Graph::new());
        let vars: Vec<Var> = ins.iter().map(|t| s.graph.leaf(t.clone(), true)).collect();
        let l = f(&mut s, &vars);
        s.graph.value(l).item()
    };
    let picks = |n: usize| -> Vec<usize> {
        match sample {
            Some(m) if m < n => (0..m).map(|i| i * n / m + (n / m) / 2).collect(),
            _ => (0..n).collect(),
        }
    };
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        for e in picks(t.numel()) {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= STEP;
            let numeric = (eval(store, &plus) - eval(store, &minus)) / (2.0 * STEP);
            worst = worst.max(rel_err(igrads[k].data()[e], numeric));
        }
    }
    for p in 0..store.len() {
        let id = ParamId(p);
        let analytic = pgrads.iter().find(|(i, _)| *i == id).map(|(_, g)| g.clone());
        for e in picks(store.get(id).numel()) {
            let a = analytic.as_ref().map_or(0.0, |g| g.data()[e]);
            let mut plus = store.clone();
            plus.get_mut(id).data_mut()[e] += STEP;
            let mut minus = store.clone();
            minus.get_mut(id).data_mut()[e] -= STEP;
            let numeric = (eval(&plus, inputs) - eval(&minus, inputs)) / (2.0 * STEP);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

use bindkit::synth;
use bindkit::Structure;

/// Chain A (designed) of length `a` next to chain B (target) of length `b`.
pub fn toy_complex(seed: u64, a: usize, b: usize) -> (Structure, Vec<bool>) {
    let s = synth::random_complex(&mut rng(seed), "TOY", &[a, b], 10.0).with_design_chains(&["A"]);
    let mask = s.design_mask();
    (s, mask)
}

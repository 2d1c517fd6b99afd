use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{edge_loss, node_loss, pair_label, total_loss, NodeMask};
use super::{add_coordinate_noise, ComplexInputs, DecodingOrder, RedNet, Result};
use crate::residue::NUM_CANONICAL;
use crate::structure::Structure;
use crate::tensor::{Adam, Graph, ParamId, Session, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub edge_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 200, learning_rate: 3e-3, edge_weight: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean total loss per step.
    pub losses: Vec<f64>,
    pub recovery_before: f64,
    pub recovery_after: f64,
}

impl TrainReport {
    /// Trailing moving average with window `w`.
    pub fn smoothed(&self, w: usize) -> Vec<f64> {
        let w = w.max(1);
        (0..self.losses.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                self.losses[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }
}

/// Teacher-forced native sequence recovery at design positions: argmax over
/// the canonical amino acids with every earlier token set to the native one.
pub fn native_recovery(model: &RedNet, inp: &ComplexInputs, order: &DecodingOrder) -> Result<f64> {
    let logits = model.forward(inp, &inp.native, order)?;
    let r = model.config.vocab;
    let design = inp.design_positions();
    if design.is_empty() {
        return Ok(0.0);
    }
    let hits = design
        .iter()
        .filter(|&&i| {
            let row = &logits.data()[i * r..i * r + NUM_CANONICAL];
            let best = (0..NUM_CANONICAL).fold(0, |b, a| if row[a] > row[b] { a } else { b });
            best == inp.native[i]
        })
        .count();
    Ok(hits as f64 / design.len() as f64)
}

fn example_grads(
    model: &RedNet,
    inp: &ComplexInputs,
    order: &DecodingOrder,
    seed: u64,
    edge_weight: f64,
) -> Result<(f64, Vec<(ParamId, Tensor)>)> {
    let r = model.config.vocab;
    let mut sess = Session::new(&model.params, Graph::training(seed));
    let enc = model.encode(&mut sess, inp)?;
    let states = model.decode(&mut sess, inp, enc, &inp.native, order)?;
    let logits = model.logits(&mut sess, states)?;
    let masks = [NodeMask::new("design", 1.0, inp.design_mask.clone())];
    let node = node_loss(&mut sess.graph, logits, &inp.native, &masks)?;
    let k = inp.residue_layout.k;
    let edges: Vec<usize> =
        (0..inp.n * k).filter(|&e| inp.residue_layout.mask[e] && inp.design_mask[e / k]).collect();
    let labels: Vec<usize> =
        edges.iter().map(|&e| pair_label(inp.native[e / k], inp.native[inp.residue_layout.index[e]], r)).collect();
    let edge_l = model.edge_logits(&mut sess, inp, states, enc, &edges)?;
    let edge = edge_loss(&mut sess.graph, edge_l, &labels)?;
    let loss = total_loss(&mut sess.graph, node, edge, edge_weight)?;
    let value = sess.graph.value(loss).item();
    Ok((value, sess.param_grads(loss)?))
}

/// Full-batch Adam over `examples` (structure and design mask), one random
/// decoding order per example and step.
pub fn train_toy(model: &mut RedNet, examples: &[(Structure, Vec<bool>)], cfg: &TrainConfig) -> Result<TrainReport> {
    let sigma = model.config.noise_sigma;
    let clean: Vec<ComplexInputs> =
        examples.iter().map(|(s, m)| ComplexInputs::build(s, m, &model.config)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_orders: Vec<DecodingOrder> = clean.iter().map(|c| DecodingOrder::random(&c.design_mask, &mut rng)).collect();
    let recovery = |m: &RedNet| -> Result<f64> {
        let v: Vec<f64> = clean.iter().zip(&eval_orders).map(|(c, o)| native_recovery(m, c, o)).collect::<Result<_>>()?;
        Ok(v.iter().sum::<f64>() / v.len().max(1) as f64)
    };
    let recovery_before = recovery(model)?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let jobs: Vec<(usize, DecodingOrder, u64)> = clean
            .iter()
            .enumerate()
            .map(|(i, c)| (i, DecodingOrder::random(&c.design_mask, &mut rng), rng.random()))
            .collect();
        let frozen = &*model;
        let results: Vec<(f64, Vec<(ParamId, Tensor)>)> = jobs
            .par_iter()
            .map(|(i, order, seed)| {
                let noisy;
                let inp = if sigma > 0.0 {
                    let (s, m) = &examples[*i];
                    noisy = ComplexInputs::build(&add_coordinate_noise(s, sigma, *seed), m, &frozen.config)?;
                    &noisy
                } else {
                    &clean[*i]
                };
                example_grads(frozen, inp, order, *seed, cfg.edge_weight)
            })
            .collect::<Result<_>>()?;
        let scale = 1.0 / results.len().max(1) as f64;
        let mut acc: Vec<(ParamId, Tensor)> = Vec::new();
        let mut loss = 0.0;
        for (l, grads) in results {
            loss += l * scale;
            for (id, g) in grads {
                match acc.iter_mut().find(|(a, _)| *a == id) {
                    Some((_, t)) => t.data_mut().iter_mut().zip(g.data()).for_each(|(x, y)| *x += y * scale),
                    None => {
                        let mut g = g;
                        g.data_mut().iter_mut().for_each(|x| *x *= scale);
                        acc.push((id, g));
                    }
                }
            }
        }
        opt.step(&mut model.params, &acc);
        losses.push(loss);
    }
    let recovery_after = recovery(model)?;
    Ok(TrainReport { losses, recovery_before, recovery_after })
}

//! Autoregressive sampling from the design model, optionally contrasted
//! against an alternative context (an off-target complex or the unbound
//! binder) to favour specificity or affinity.

mod contrast;

pub use contrast::{
    best_candidate, candidate_set, contrastive_logits, pick, restricted_softmax, softmax, ContrastScores,
    GREEDY_TEMPERATURE, PROB_FLOOR,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComplexInputs, DecodingOrder, EncoderCache, ModelConfig, ModelError, RedNet};
use crate::residue::{detokenize, MASK_TOKEN, NUM_CANONICAL};
use crate::structure::Structure;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error("invalid decode context: {0}")]
    Context(String),
    #[error("encoder failed: {0}")]
    Encode(#[source] ModelError),
    #[error("model failed at step {step}: {source}")]
    Step { step: usize, source: ModelError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Standard,
    ContrastOfftarget,
    ContrastUnbound,
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Standard => "standard",
            DecodeMode::ContrastOfftarget => "contrast_offtarget",
            DecodeMode::ContrastUnbound => "contrast_unbound",
        })
    }
}

impl FromStr for DecodeMode {
    type Err = DecodeError;
    fn from_str(s: &str) -> Result<Self, DecodeError> {
        match s {
            "standard" => Ok(DecodeMode::Standard),
            "contrast_offtarget" => Ok(DecodeMode::ContrastOfftarget),
            "contrast_unbound" => Ok(DecodeMode::ContrastUnbound),
            _ => Err(DecodeError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
    pub seed: u64,
    pub mode: DecodeMode,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.9, temperature: 1e-3, seed: 0, mode: DecodeMode::ContrastOfftarget }
    }
}

impl DecodeConfig {
    pub fn standard(temperature: f64, seed: u64) -> Self {
        Self { alpha: 0.0, beta: 0.0, temperature, seed, mode: DecodeMode::Standard }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(DecodeError::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(DecodeError::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DecodeError::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        Ok(())
    }

    fn greedy(&self) -> bool {
        self.temperature <= GREEDY_TEMPERATURE
    }
}

/// Second context contrasted against the on-context.
#[derive(Debug, Clone, Copy)]
pub struct AltContext<'a> {
    pub inputs: &'a ComplexInputs,
    /// For every on-context residue, the matching alternative-context design
    /// residue. Only design positions may be mapped.
    pub map: &'a [Option<usize>],
}

#[derive(Debug, Clone)]
pub struct DecodeContext<'a> {
    pub on: &'a ComplexInputs,
    pub order: DecodingOrder,
    pub alt: Option<AltContext<'a>>,
    alt_order: Option<DecodingOrder>,
}

impl<'a> DecodeContext<'a> {
    pub fn new(on: &'a ComplexInputs, order: DecodingOrder, alt: Option<AltContext<'a>>) -> Result<Self, DecodeError> {
        if order.len() != on.n || (0..on.n).any(|i| order.is_design(i) != on.design_mask[i]) {
            return Err(DecodeError::Context("decoding order does not match the design mask".into()));
        }
        if order.positions().is_empty() {
            return Err(DecodeError::Context("no design positions".into()));
        }
        let alt_order = match &alt {
            None => None,
            Some(a) => Some(alt_order(on, &order, a)?),
        };
        Ok(Self { on, order, alt, alt_order })
    }

    /// Design positions without a partner in the alternative context.
    pub fn unmatched(&self) -> Vec<usize> {
        match &self.alt {
            None => self.order.positions().to_vec(),
            Some(a) => self.order.positions().iter().copied().filter(|&p| a.map[p].is_none()).collect(),
        }
    }
}

/// Alternative-context order: mapped positions follow the on-context order,
/// unmatched alternative design residues come last and are never decoded.
fn alt_order(on: &ComplexInputs, order: &DecodingOrder, alt: &AltContext<'_>) -> Result<DecodingOrder, DecodeError> {
    let inp = alt.inputs;
    if alt.map.len() != on.n {
        return Err(DecodeError::Context(format!("position map has {} entries for {} residues", alt.map.len(), on.n)));
    }
    let mut taken = vec![false; inp.n];
    let mut seq = Vec::new();
    for &p in order.positions() {
        if let Some(q) = alt.map[p] {
            if q >= inp.n || !inp.design_mask[q] {
                return Err(DecodeError::Context(format!("position {p} maps to non-design residue {q}")));
            }
            if std::mem::replace(&mut taken[q], true) {
                return Err(DecodeError::Context(format!("residue {q} is matched twice")));
            }
            seq.push(q);
        }
    }
    if let Some(p) = (0..on.n).find(|&p| !on.design_mask[p] && alt.map[p].is_some()) {
        return Err(DecodeError::Context(format!("non-design position {p} is mapped")));
    }
    seq.extend((0..inp.n).filter(|&q| inp.design_mask[q] && !taken[q]));
    DecodingOrder::new(seq, &inp.design_mask).map_err(|e| DecodeError::Context(e.to_string()))
}

/// One decoding step as seen by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeStep {
    pub position: usize,
    /// On-context probabilities over the canonical amino acids.
    pub p_on: Vec<f64>,
    pub p_off: Option<Vec<f64>>,
    pub candidates: Vec<usize>,
    /// Sampling distribution over `candidates`.
    pub probs: Vec<f64>,
    pub token: usize,
    pub contrasted: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Full-length tokens: designed residues at design positions, native
    /// tokens elsewhere.
    pub tokens: Vec<usize>,
    /// Designed residues in residue order.
    pub sequence: String,
    /// Mean on-context log-probability of the emitted tokens.
    pub mean_log_likelihood: f64,
    pub config: DecodeConfig,
    pub steps: Vec<DecodeStep>,
}

impl Design {
    pub fn fasta_header(&self, name: &str) -> String {
        let c = &self.config;
        format!(
            ">{name} seed={} alpha={} beta={} temp={} mode={} mean_ll={:.6}",
            c.seed, c.alpha, c.beta, c.temperature, c.mode, self.mean_log_likelihood
        )
    }
}

struct Prepared<'c, 'a> {
    ctx: &'c DecodeContext<'a>,
    on_cache: EncoderCache,
    alt_cache: Option<EncoderCache>,
}

fn prepare<'c, 'a>(model: &RedNet, ctx: &'c DecodeContext<'a>, cfg: &DecodeConfig) -> Result<Prepared<'c, 'a>, DecodeError> {
    cfg.validate()?;
    if cfg.mode != DecodeMode::Standard && ctx.alt.is_none() {
        return Err(DecodeError::Context(format!("mode {} needs an alternative context", cfg.mode)));
    }
    let on_cache = model.encode_cached(ctx.on).map_err(DecodeError::Encode)?;
    let alt_cache = match (&ctx.alt, cfg.mode) {
        (Some(a), m) if m != DecodeMode::Standard => Some(model.encode_cached(a.inputs).map_err(DecodeError::Encode)?),
        _ => None,
    };
    Ok(Prepared { ctx, on_cache, alt_cache })
}

fn canonical_probs(logits: &[f64], row: usize, vocab: usize) -> Vec<f64> {
    softmax(&logits[row * vocab..row * vocab + NUM_CANONICAL])
}

fn initial_tokens(inp: &ComplexInputs) -> Vec<usize> {
    (0..inp.n).map(|i| if inp.design_mask[i] { MASK_TOKEN } else { inp.native[i] }).collect()
}

fn run(model: &RedNet, prep: &Prepared<'_, '_>, cfg: &DecodeConfig) -> Result<Design, DecodeError> {
    let ctx = prep.ctx;
    let vocab = model.config.vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut on_tokens = initial_tokens(ctx.on);
    let mut alt_tokens = ctx.alt.as_ref().map(|a| initial_tokens(a.inputs));
    let mut steps = Vec::with_capacity(ctx.order.positions().len());
    let mut ll = 0.0;

    for (t, &pos) in ctx.order.positions().iter().enumerate() {
        let fail = |source| DecodeError::Step { step: t, source };
        let on_logits = model.forward_cached(ctx.on, &prep.on_cache, &on_tokens, &ctx.order).map_err(fail)?;
        let p_on = canonical_probs(on_logits.data(), pos, vocab);

        let partner = match (&ctx.alt, &prep.alt_cache, &alt_tokens) {
            (Some(a), Some(cache), Some(tokens)) => a.map[pos].map(|q| (a, cache, tokens, q)),
            _ => None,
        };
        let p_off = match partner {
            Some((a, cache, tokens, q)) => {
                let order = ctx.alt_order.as_ref().expect("alt order exists with alt context");
                let logits = model.forward_cached(a.inputs, cache, tokens, order).map_err(fail)?;
                Some(canonical_probs(logits.data(), q, vocab))
            }
            None => {
                if prep.alt_cache.is_some() {
                    log::debug!("step {t}: position {pos} has no alternative partner, decoding without contrast");
                }
                None
            }
        };
        let contrasted = p_off.is_some();
        let alpha = if contrasted { cfg.alpha } else { 0.0 };
        let ContrastScores { scores, clamped } = contrastive_logits(&p_on, p_off.as_deref().unwrap_or(&p_on), alpha);
        let candidates = candidate_set(&p_on, cfg.beta);
        let probs = restricted_softmax(&scores, &candidates, cfg.temperature);
        let u: f64 = rng.random();
        let token = if cfg.greedy() { best_candidate(&scores, &candidates) } else { candidates[pick(&probs, u)] };

        ll += p_on[token].max(PROB_FLOOR).ln();
        on_tokens[pos] = token;
        let partner_pos = partner.map(|p| p.3);
        if let (Some(tokens), Some(q)) = (alt_tokens.as_mut(), partner_pos) {
            tokens[q] = token;
        }
        steps.push(DecodeStep { position: pos, p_on, p_off, candidates, probs, token, contrasted, clamped });
    }

    let positions = ctx.on.design_positions();
    let sequence = detokenize(&positions.iter().map(|&p| on_tokens[p]).collect::<Vec<_>>());
    Ok(Design {
        tokens: on_tokens,
        sequence,
        mean_log_likelihood: ll / steps.len() as f64,
        config: *cfg,
        steps,
    })
}

/// Decodes one sequence. In standard mode the alternative context is
/// ignored; contrast modes require one.
pub fn contrastive_decode(model: &RedNet, ctx: &DecodeContext<'_>, cfg: &DecodeConfig) -> Result<Design, DecodeError> {
    let prep = prepare(model, ctx, cfg)?;
    run(model, &prep, cfg)
}

/// Decodes `n` sequences with seeds `cfg.seed, cfg.seed + 1, ...` in
/// parallel, sharing the encoder pass.
pub fn decode_many(model: &RedNet, ctx: &DecodeContext<'_>, cfg: &DecodeConfig, n: usize) -> Result<Vec<Design>, DecodeError> {
    let prep = prepare(model, ctx, cfg)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| run(model, &prep, &DecodeConfig { seed: cfg.seed.wrapping_add(i), ..*cfg }))
        .collect()
}

/// Bound complex plus the binder alone, with the residue correspondence.
#[derive(Debug, Clone)]
pub struct AffinityInputs {
    pub bound: ComplexInputs,
    pub unbound: ComplexInputs,
    pub map: Vec<Option<usize>>,
}

impl AffinityInputs {
    /// The unbound context keeps only chains holding a design residue.
    pub fn build(s: &Structure, design_mask: &[bool], cfg: &ModelConfig) -> Result<Self, DecodeError> {
        let (binder, map) = unbound_binder(s, design_mask);
        if binder.n_residues() == 0 {
            return Err(DecodeError::Context("no design residues".into()));
        }
        let unbound_mask: Vec<bool> = {
            let mut m = vec![false; binder.n_residues()];
            for (i, q) in map.iter().enumerate() {
                if let Some(q) = q {
                    m[*q] = design_mask[i];
                }
            }
            m
        };
        let map = map.iter().enumerate().map(|(i, q)| q.filter(|_| design_mask[i])).collect();
        let bound = ComplexInputs::build(s, design_mask, cfg).map_err(DecodeError::Encode)?;
        let unbound = ComplexInputs::build(&binder, &unbound_mask, cfg).map_err(DecodeError::Encode)?;
        Ok(Self { bound, unbound, map })
    }
}

/// Deletes every chain without design residues. Returns the reduced
/// structure and, per original residue, its index in it.
pub fn unbound_binder(s: &Structure, design_mask: &[bool]) -> (Structure, Vec<Option<usize>>) {
    let mut offset = 0;
    let mut keep = Vec::new();
    for c in &s.chains {
        if design_mask[offset..offset + c.len()].iter().any(|&d| d) {
            keep.push(c.id.as_str());
        }
        offset += c.len();
    }
    let binder = s.subset(&keep);
    let mut map = Vec::with_capacity(s.n_residues());
    let mut next = 0;
    for c in &s.chains {
        let kept = keep.contains(&c.id.as_str());
        for _ in &c.residues {
            map.push(kept.then(|| {
                next += 1;
                next - 1
            }));
        }
    }
    (binder, map)
}

/// Contrasts the bound complex against the unbound binder.
pub fn decode_affinity(
    model: &RedNet,
    inputs: &AffinityInputs,
    order: DecodingOrder,
    cfg: &DecodeConfig,
) -> Result<Design, DecodeError> {
    let alt = AltContext { inputs: &inputs.unbound, map: &inputs.map };
    let ctx = DecodeContext::new(&inputs.bound, order, Some(alt))?;
    contrastive_decode(model, &ctx, &DecodeConfig { mode: DecodeMode::ContrastUnbound, ..*cfg })
}

/// Autoregressive log-probabilities of `tokens` at the design positions,
/// each conditioned on the tokens decoded before it. Returns one value per
/// entry of `order.positions()`, renormalized over the canonical residues.
pub fn sequence_log_probs(
    model: &RedNet,
    inp: &ComplexInputs,
    tokens: &[usize],
    order: &DecodingOrder,
) -> Result<Vec<f64>, ModelError> {
    let logits = model.forward(inp, tokens, order)?;
    let vocab = model.config.vocab;
    Ok(order
        .positions()
        .iter()
        .map(|&p| {
            let probs = canonical_probs(logits.data(), p, vocab);
            probs.get(tokens[p]).copied().unwrap_or(0.0).max(PROB_FLOOR).ln()
        })
        .collect())
}

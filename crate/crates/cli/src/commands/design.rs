use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use bindkit::benchmark::align_binders;
use bindkit::decoder::{decode_many, AffinityInputs, AltContext, DecodeConfig, DecodeContext, DecodeMode, Design};
use bindkit::model::ComplexInputs;
use bindkit::Structure;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::model::OrderKind;
use super::{load_model, load_structure, with_design, ModelArgs};
use crate::io::{to_json, usage, Run};
use crate::Global;

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Standard,
    ContrastOfftarget,
    ContrastUnbound,
}

impl From<ModeArg> for DecodeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Standard => DecodeMode::Standard,
            ModeArg::ContrastOfftarget => DecodeMode::ContrastOfftarget,
            ModeArg::ContrastUnbound => DecodeMode::ContrastUnbound,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct DesignArgs {
    /// On-target complex.
    #[arg(long)]
    pub on: PathBuf,
    /// Off-target complex holding a homologous binder chain.
    #[arg(long)]
    pub off: Option<PathBuf>,
    #[arg(long)]
    pub design_chain: String,
    /// Binder chain in the off-target complex (default: --design-chain).
    #[arg(long)]
    pub off_chain: Option<String>,
    /// Contrast strength.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Candidate-set threshold relative to the top on-target probability
    /// (default 0.9 when contrasting, 0 in standard mode).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sampling temperature; at or below 0.001 decoding is greedy.
    #[arg(long, default_value_t = 1e-3)]
    pub temp: f64,
    /// Number of designs; design i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Default: contrast-offtarget when --off is given, standard otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "left-to-right")]
    pub order: OrderKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// FASTA output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step JSON trace: on/off probabilities, candidate set and the
    /// sampling distribution of every step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn chain_offset(s: &Structure, chain: &str) -> usize {
    s.chains.iter().take_while(|c| c.id != chain).map(|c| c.len()).sum()
}

fn trace_entry(i: usize, d: &Design) -> Value {
    let steps: Vec<Value> = d
        .steps
        .iter()
        .map(|s| {
            json!({
                "position": s.position,
                "p_on": s.p_on,
                "p_off": s.p_off,
                "candidates": s.candidates,
                "probs": s.probs,
                "token": s.token,
                "contrasted": s.contrasted,
                "clamped": s.clamped,
            })
        })
        .collect();
    json!({ "design": i, "seed": d.config.seed, "sequence": d.sequence, "steps": steps })
}

pub fn run(g: &Global, a: DesignArgs) -> anyhow::Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let mode = a.mode.unwrap_or(if a.off.is_some() { ModeArg::ContrastOfftarget } else { ModeArg::Standard });
    match (mode, a.off.is_some()) {
        (ModeArg::ContrastOfftarget, false) => return Err(usage("contrast-offtarget needs --off")),
        (ModeArg::Standard | ModeArg::ContrastUnbound, true) => {
            return Err(usage("--off is only used in contrast-offtarget mode"))
        }
        _ => {}
    }
    let cfg = match mode {
        ModeArg::Standard => DecodeConfig { beta: a.beta.unwrap_or(0.0), ..DecodeConfig::standard(a.temp, g.seed) },
        _ => DecodeConfig { alpha: a.alpha, beta: a.beta.unwrap_or(0.9), temperature: a.temp, seed: g.seed, mode: mode.into() },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let mut run = Run::new("design", g, &a)?;
    let model = load_model(&mut run, &a.model, g.seed)?;
    let (on_s, mask) = with_design(load_structure(&mut run, &a.on)?, std::slice::from_ref(&a.design_chain), &a.on)?;
    let order = a.order.build(&mask, g.seed);
    let mut summary = json!({ "mode": DecodeMode::from(mode).to_string(), "designs": a.n });

    let designs = match mode {
        ModeArg::Standard => {
            let on = ComplexInputs::build(&on_s, &mask, &model.config)?;
            decode_many(&model, &DecodeContext::new(&on, order, None)?, &cfg, a.n)?
        }
        ModeArg::ContrastUnbound => {
            let aff = AffinityInputs::build(&on_s, &mask, &model.config)?;
            let alt = AltContext { inputs: &aff.unbound, map: &aff.map };
            decode_many(&model, &DecodeContext::new(&aff.bound, order, Some(alt))?, &cfg, a.n)?
        }
        ModeArg::ContrastOfftarget => {
            let off_path = a.off.as_ref().expect("checked above");
            let off_chain = a.off_chain.clone().unwrap_or_else(|| a.design_chain.clone());
            let (off_s, off_mask) =
                with_design(load_structure(&mut run, off_path)?, std::slice::from_ref(&off_chain), off_path)?;
            let on_chain = on_s.chain(&a.design_chain).expect("validated");
            let aln = align_binders(on_chain, off_s.chain(&off_chain).expect("validated"))
                .with_context(|| format!("aligning binder {} with {}", a.design_chain, off_chain))?;
            let (o1, o2) = (chain_offset(&on_s, &a.design_chain), chain_offset(&off_s, &off_chain));
            let mut map = vec![None; on_s.n_residues()];
            for &(i, j) in &aln.pairs {
                map[o1 + i] = Some(o2 + j);
            }
            summary["alignment"] = json!({
                "identity": aln.identity, "coverage": aln.coverage, "rmsd": aln.rmsd, "aligned": aln.pairs.len(),
            });
            let on = ComplexInputs::build(&on_s, &mask, &model.config)?;
            let off = ComplexInputs::build(&off_s, &off_mask, &model.config)?;
            let ctx = DecodeContext::new(&on, order, Some(AltContext { inputs: &off, map: &map }))?;
            summary["unmatched_positions"] = json!(ctx.unmatched().len());
            decode_many(&model, &ctx, &cfg, a.n)?
        }
    };

    let stem = a.on.file_stem().and_then(|s| s.to_str()).unwrap_or("design").to_string();
    let mut fasta = String::new();
    for (i, d) in designs.iter().enumerate() {
        writeln!(fasta, "{}", d.fasta_header(&format!("{stem}_{i}")))?;
        writeln!(fasta, "{}", d.sequence)?;
    }
    run.write(&a.out, fasta.as_bytes())?;
    if let Some(path) = &a.trace {
        let trace: Vec<Value> = designs.iter().enumerate().map(|(i, d)| trace_entry(i, d)).collect();
        run.write(path, &to_json(&trace)?)?;
    }
    summary["mean_log_likelihood"] = json!(designs.iter().map(|d| d.mean_log_likelihood).collect::<Vec<_>>());
    run.summarize(summary);
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

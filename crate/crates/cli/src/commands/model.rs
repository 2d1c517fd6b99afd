use std::fmt::Write as _;
use std::path::PathBuf;

use bindkit::model::{native_recovery, train_toy, ComplexInputs, DecodingOrder, TrainConfig};
use bindkit::residue::AminoAcid;
use bindkit::synth::random_complex;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::{load_model, load_structure, read_config, residue_labels, with_design, ModelArgs};
use crate::io::{fmt_f64, usage, Run};
use crate::Global;

#[derive(Args, Serialize, Debug)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Chains whose sequence is hidden from the features.
    #[arg(long, value_delimiter = ',', required = true)]
    pub design_chains: Vec<String>,
    #[arg(long, env = "BINDKIT_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn featurize(g: &Global, a: FeaturizeArgs) -> anyhow::Result<()> {
    let mut run = Run::new("featurize", g, &a)?;
    let cfg = read_config(&mut run, a.config.as_deref())?;
    let (s, mask) = with_design(load_structure(&mut run, &a.input)?, &a.design_chains, &a.input)?;
    let inp = ComplexInputs::build(&s, &mask, &cfg)?;
    run.write(&a.out, &inp.to_container(&cfg).to_bytes())?;
    run.summarize(json!({ "residues": inp.n, "design_positions": inp.design_positions().len(), "atoms": inp.atom.n_atoms }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(Args, Serialize, Debug)]
pub struct TrainArgs {
    /// Training complexes. Synthetic complexes are generated when none are
    /// given.
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Design chains applied to every input (default: first chain).
    #[arg(long, value_delimiter = ',')]
    pub design_chains: Vec<String>,
    /// Number of synthetic complexes.
    #[arg(long, default_value_t = 5)]
    pub synthetic: usize,
    /// Chain lengths of each synthetic complex; the first chain is designed.
    #[arg(long, value_delimiter = ',', default_values_t = [20, 20])]
    pub synthetic_lengths: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub edge_weight: f64,
    #[arg(long, env = "BINDKIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Weight file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss TSV.
    #[arg(long)]
    pub losses: Option<PathBuf>,
}

pub fn train(g: &Global, a: TrainArgs) -> anyhow::Result<()> {
    if a.steps == 0 || a.lr <= 0.0 {
        return Err(usage("--steps and --lr must be positive"));
    }
    let mut run = Run::new("train-toy", g, &a)?;
    let cfg = read_config(&mut run, a.config.as_deref())?;
    let mut examples = Vec::new();
    if a.inputs.is_empty() {
        if a.synthetic == 0 || a.synthetic_lengths.len() < 2 {
            return Err(usage("synthetic training needs --synthetic > 0 and at least two chain lengths"));
        }
        for i in 0..a.synthetic {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed.wrapping_add(100 + i as u64));
            let s = random_complex(&mut rng, &format!("SYN{i}"), &a.synthetic_lengths, 10.0).with_design_chains(&["A"]);
            let mask = s.design_mask();
            examples.push((s, mask));
        }
    } else {
        for path in &a.inputs {
            let s = load_structure(&mut run, path)?;
            let chains = if a.design_chains.is_empty() {
                vec![s.chains.first().map(|c| c.id.clone()).unwrap_or_default()]
            } else {
                a.design_chains.clone()
            };
            examples.push(with_design(s, &chains, path)?);
        }
    }
    let mut model = bindkit::model::RedNet::new(cfg, g.seed)?;
    let tc = TrainConfig { steps: a.steps, learning_rate: a.lr, edge_weight: a.edge_weight, seed: g.seed };
    let report = train_toy(&mut model, &examples, &tc)?;
    run.write(&a.out, &model.to_container().to_bytes())?;
    if let Some(path) = &a.losses {
        let mut tsv = String::from("step\tloss\tsmoothed10\n");
        for (i, (l, s)) in report.losses.iter().zip(report.smoothed(10)).enumerate() {
            writeln!(tsv, "{i}\t{}\t{}", fmt_f64(*l), fmt_f64(s))?;
        }
        run.write(path, tsv.as_bytes())?;
    }
    run.summarize(json!({
        "examples": examples.len(),
        "first_loss": report.losses.first(),
        "last_loss": report.losses.last(),
        "recovery_before": report.recovery_before,
        "recovery_after": report.recovery_after,
    }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKind {
    LeftToRight,
    Random,
}

impl OrderKind {
    pub fn build(self, mask: &[bool], seed: u64) -> DecodingOrder {
        match self {
            OrderKind::LeftToRight => DecodingOrder::left_to_right(mask),
            OrderKind::Random => DecodingOrder::random(mask, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct LogitsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub design_chains: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "left-to-right")]
    pub order: OrderKind,
    /// TSV: chain, residue, native letter, design flag, decoding rank, then
    /// one raw logit column per vocabulary token.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn token_name(i: usize) -> String {
    match AminoAcid::from_index(i) {
        Some(a) if i < bindkit::residue::NUM_CANONICAL => a.one_letter().to_string(),
        Some(_) if i == bindkit::residue::UNK_TOKEN => "X".into(),
        _ => format!("t{i}"),
    }
}

pub fn logits(g: &Global, a: LogitsArgs) -> anyhow::Result<()> {
    let mut run = Run::new("logits", g, &a)?;
    let model = load_model(&mut run, &a.model, g.seed)?;
    let (s, mask) = with_design(load_structure(&mut run, &a.input)?, &a.design_chains, &a.input)?;
    let inp = ComplexInputs::build(&s, &mask, &model.config)?;
    let order = a.order.build(&mask, g.seed);
    let logits = model.forward(&inp, &inp.native, &order)?;
    let vocab = model.config.vocab;
    let mut rank = vec![None; inp.n];
    for (t, &p) in order.positions().iter().enumerate() {
        rank[p] = Some(t);
    }
    let mut tsv = String::from("chain\tresidue\tnative\tdesign\trank");
    for t in 0..vocab {
        write!(tsv, "\t{}", token_name(t))?;
    }
    tsv.push('\n');
    for (i, (chain, res)) in residue_labels(&s).into_iter().enumerate() {
        let native = bindkit::residue::detokenize(&[inp.native[i]]);
        let r = rank[i].map_or("-".into(), |r| r.to_string());
        write!(tsv, "{chain}\t{res}\t{native}\t{}\t{r}", u8::from(mask[i]))?;
        for v in logits.row(i) {
            write!(tsv, "\t{}", fmt_f64(*v))?;
        }
        tsv.push('\n');
    }
    run.write(&a.out, tsv.as_bytes())?;
    let recovery = native_recovery(&model, &inp, &order)?;
    run.summarize(json!({ "residues": inp.n, "design_positions": order.len(), "teacher_forced_recovery": recovery }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

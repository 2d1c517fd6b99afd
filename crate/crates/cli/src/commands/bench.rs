use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use bindkit::benchmark::{
    complex_class, contact_density, contacts, curate_selectivity_set, eval_recovery, rank_decoys, residue_min_distance,
    selectivity_success, topk_precision, ContactDef, CurationParams, RecoveryCase, ResidueKey, ScoredContact, TopK,
    SELECTIVITY_THRESHOLDS,
};
use bindkit::decoder::{contrastive_decode, softmax, DecodeConfig, DecodeContext};
use bindkit::model::ComplexInputs;
use bindkit::residue::NUM_CANONICAL;
use bindkit::Structure;
use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::model::OrderKind;
use super::{load_model, load_structure, residue_labels, with_design, ModelArgs};
use crate::io::{fmt_f64, fmt_opt, to_json, usage, Run};
use crate::Global;

#[derive(Subcommand)]
pub enum BenchCommand {
    /// Inter-chain contacts, with optional top-k precision of predictions.
    Contacts(ContactsArgs),
    /// Build a selective-binder test set from a corpus of complexes.
    Curate(CurateArgs),
    /// Success rates of on- vs off-target score differences.
    Selectivity(SelectivityArgs),
    /// Sequence recovery, log-likelihood and perplexity per complex class.
    Recovery(RecoveryArgs),
    /// Rank docking decoys by how many predicted contacts they realize.
    RankDecoys(RankDecoysArgs),
}

pub fn run(g: &Global, c: BenchCommand) -> anyhow::Result<()> {
    match c {
        BenchCommand::Contacts(a) => contacts_cmd(g, a),
        BenchCommand::Curate(a) => curate(g, a),
        BenchCommand::Selectivity(a) => selectivity(g, a),
        BenchCommand::Recovery(a) => recovery(g, a),
        BenchCommand::RankDecoys(a) => rank(g, a),
    }
}

fn parse_def(s: &str) -> Result<ContactDef, String> {
    s.parse()
}

fn parse_topk(s: &str) -> Result<TopK, String> {
    s.parse()
}

#[derive(Args, Serialize, Debug)]
pub struct ContactsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// heavy8 (heavy atoms < 8 Å) or ca10 (Cα–Cα ≤ 10 Å).
    #[arg(long, value_parser = parse_def, default_value = "heavy8")]
    #[serde(serialize_with = "ser_display")]
    pub def: ContactDef,
    /// TSV: chain_a, residue_a, chain_b, residue_b, distance.
    #[arg(long)]
    pub out: PathBuf,
    /// Predicted contacts TSV: chain_a, residue_a, chain_b, residue_b, score.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
    /// Cut-offs for top-k precision: integers or L/<n> with L the shorter
    /// chain of the first two.
    #[arg(long, value_delimiter = ',', value_parser = parse_topk, default_value = "10,25,50,L/10,L/5")]
    #[serde(skip)]
    pub top_k: Vec<TopK>,
    /// TSV of top-k precision, written when predictions are given.
    #[arg(long)]
    pub precision_out: Option<PathBuf>,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Residue lookup by chain id and author residue label.
fn residue_index(s: &Structure) -> HashMap<(String, String), ResidueKey> {
    let labels = residue_labels(s);
    s.residues().zip(labels).map(|((c, r), l)| (l, (c, r.index))).collect()
}

fn parse_predicted(text: &str, s: &Structure) -> anyhow::Result<Vec<ScoredContact>> {
    let index = residue_index(s);
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("chain") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            anyhow::bail!("line {}: expected 5 columns", ln + 1);
        }
        let key = |c: &str, r: &str| {
            index
                .get(&(c.to_string(), r.to_string()))
                .copied()
                .ok_or_else(|| anyhow::anyhow!("line {}: no residue {c}:{r}", ln + 1))
        };
        let score: f64 = cols[4].parse().map_err(|_| anyhow::anyhow!("line {}: bad score", ln + 1))?;
        out.push(ScoredContact { a: key(cols[0], cols[1])?, b: key(cols[2], cols[3])?, score });
    }
    Ok(out)
}

fn contacts_cmd(g: &Global, a: ContactsArgs) -> anyhow::Result<()> {
    let mut run = Run::new("bench contacts", g, &a)?;
    let s = load_structure(&mut run, &a.input)?;
    let cs = contacts(&s, a.def);
    let res = |k: ResidueKey| &s.chains[k.0].residues[k.1];
    let label = |k: ResidueKey| {
        let r = res(k);
        format!("{}\t{}{}", s.chains[k.0].id, r.seq_id, r.insertion.map(String::from).unwrap_or_default())
    };
    let mut tsv = String::from("chain_a\tresidue_a\tchain_b\tresidue_b\tdistance\n");
    for &(x, y) in cs.iter() {
        let d = match a.def {
            ContactDef::Heavy8 => residue_min_distance(res(x), res(y)),
            ContactDef::Ca10 => match (res(x).ca(), res(y).ca()) {
                (Some(p), Some(q)) => (p - q).norm(),
                _ => f64::NAN,
            },
        };
        writeln!(tsv, "{}\t{}\t{}", label(x), label(y), fmt_f64(d))?;
    }
    run.write(&a.out, tsv.as_bytes())?;
    let mut summary = json!({ "contacts": cs.len(), "definition": a.def.to_string() });
    if s.chains.len() >= 2 {
        let (l1, l2) = (s.chains[0].len(), s.chains[1].len());
        let first_pair = cs.iter().filter(|(x, y)| x.0 == 0 && y.0 == 1).count();
        summary["density_first_pair"] = json!(if l1 * l2 == 0 { 0.0 } else { first_pair as f64 / (l1 * l2) as f64 });
        if s.chains.len() == 2 {
            summary["density"] = json!(contact_density(&cs, l1, l2));
        }
    }
    if let Some(p) = &a.predicted {
        let text = run.read_string(p)?;
        let predicted = parse_predicted(&text, &s).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
        let shorter = s.chains.iter().take(2).map(|c| c.len()).min().unwrap_or(0);
        let mut ptsv = String::from("k\tresolved_k\tprecision\n");
        for k in &a.top_k {
            let kk = k.resolve(shorter);
            let prec = if kk == 0 { None } else { Some(topk_precision(&predicted, &cs, kk)?) };
            let name = match k {
                TopK::Fixed(n) => n.to_string(),
                TopK::LengthOver(d) => format!("L/{d}"),
            };
            writeln!(ptsv, "{name}\t{kk}\t{}", fmt_opt(prec))?;
        }
        let out = a.precision_out.clone().unwrap_or_else(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".precision.tsv");
            PathBuf::from(p)
        });
        run.write(&out, ptsv.as_bytes())?;
    }
    run.summarize(summary);
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(Args, Serialize, Debug)]
pub struct CurateArgs {
    /// Corpus entries, one complex per file.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Keep a uniform random subset of this many cases.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_entries: usize,
    #[arg(long, default_value_t = 30)]
    pub max_entries: usize,
    #[arg(long, default_value_t = 0.9)]
    pub max_difficulty: f64,
    /// Curation report JSON: parameters, every case with its alignment and
    /// provenance, and every rejection with its reason.
    #[arg(long)]
    pub out: PathBuf,
    /// Case table TSV.
    #[arg(long)]
    pub cases: Option<PathBuf>,
}

fn curate(g: &Global, a: CurateArgs) -> anyhow::Result<()> {
    let mut run = Run::new("bench curate", g, &a)?;
    let entries: Vec<Structure> =
        a.inputs.iter().map(|p| load_structure(&mut run, p)).collect::<anyhow::Result<_>>()?;
    let params = CurationParams {
        seed: g.seed,
        sample: a.sample,
        min_entries: a.min_entries,
        max_entries: a.max_entries,
        max_difficulty: a.max_difficulty,
        ..CurationParams::default()
    };
    let report = curate_selectivity_set(&entries, &params);
    let mut manifest = serde_json::to_value(&report)?;
    manifest["inputs"] = json!(a.inputs);
    run.write(&a.out, &to_json(&manifest)?)?;
    if let Some(path) = &a.cases {
        let mut tsv = String::from(
            "cluster\ton_entry\ton_binder\ton_target\toff_entry\toff_binder\toff_target\tidentity\tcoverage\trmsd\tdifficulty\n",
        );
        for c in &report.cases {
            writeln!(
                tsv,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.cluster,
                c.binder_on.entry_id,
                c.binder_on.chain,
                c.target_on.chain,
                c.binder_off.entry_id,
                c.binder_off.chain,
                c.target_off.chain,
                fmt_f64(c.identity),
                fmt_f64(c.coverage),
                fmt_f64(c.rmsd),
                fmt_f64(c.difficulty)
            )?;
        }
        run.write(path, tsv.as_bytes())?;
    }
    run.summarize(json!({ "cases": report.cases.len(), "rejections": report.rejections.len(), "clusters": report.n_clusters }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(Args, Serialize, Debug)]
pub struct SelectivityArgs {
    /// TSV: name, score_on, score_off (lower is better binding). A header
    /// line starting with `name` is skipped.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = SELECTIVITY_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    /// TSV: threshold, rate (NA without cases), cases.
    #[arg(long)]
    pub out: PathBuf,
}

fn selectivity(g: &Global, a: SelectivityArgs) -> anyhow::Result<()> {
    let mut run = Run::new("bench selectivity", g, &a)?;
    let text = run.read_string(&a.input)?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("name") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let num = |i: usize| -> anyhow::Result<f64> {
            cols.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| anyhow::anyhow!("{}: line {}: bad column {}", a.input.display(), ln + 1, i + 1))
        };
        rows.push((num(1)?, num(2)?));
    }
    let rates = selectivity_success(&rows, &a.thresholds);
    let mut tsv = String::from("threshold\trate\tcases\n");
    for r in &rates {
        writeln!(tsv, "{}\t{}\t{}", fmt_f64(r.threshold), fmt_opt(r.rate), rows.len())?;
    }
    run.write(&a.out, tsv.as_bytes())?;
    run.summarize(json!({ "cases": rows.len() }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(Args, Serialize, Debug)]
pub struct RecoveryArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Design chains for every input (default: first chain).
    #[arg(long, value_delimiter = ',')]
    pub design_chains: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub temp: f64,
    #[arg(long, value_enum, default_value = "left-to-right")]
    pub order: OrderKind,
    /// TSV: class, cases, nsr, ll, ppl.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-input TSV: path, class, designed and native sequences.
    #[arg(long)]
    pub per_case: Option<PathBuf>,
}

fn recovery(g: &Global, a: RecoveryArgs) -> anyhow::Result<()> {
    let mut run = Run::new("bench recovery", g, &a)?;
    let model = load_model(&mut run, &a.model, g.seed)?;
    let cfg = DecodeConfig::standard(a.temp, g.seed);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let mut prepared = Vec::new();
    for path in &a.inputs {
        let s = load_structure(&mut run, path)?;
        let chains = if a.design_chains.is_empty() {
            vec![s.chains.first().map(|c| c.id.clone()).unwrap_or_default()]
        } else {
            a.design_chains.clone()
        };
        let class = complex_class(&s);
        let (s, mask) = with_design(s, &chains, path)?;
        prepared.push((class, s, mask));
    }
    // inputs are independent; collecting in input order keeps output stable
    let cases: Vec<RecoveryCase> = prepared
        .par_iter()
        .map(|(class, s, mask)| -> anyhow::Result<RecoveryCase> {
            let inp = ComplexInputs::build(s, mask, &model.config)?;
            let order = a.order.build(mask, g.seed);
            let design = contrastive_decode(&model, &DecodeContext::new(&inp, order.clone(), None)?, &cfg)?;
            let logits = model.forward(&inp, &inp.native, &order)?;
            let vocab = model.config.vocab;
            let (mut designed, mut native, mut logp) = (Vec::new(), Vec::new(), Vec::new());
            for p in inp.design_positions() {
                if inp.native[p] >= NUM_CANONICAL {
                    continue;
                }
                let row = &logits.data()[p * vocab..p * vocab + NUM_CANONICAL];
                designed.push(design.tokens[p]);
                native.push(inp.native[p]);
                logp.push(softmax(row).iter().map(|q| q.max(1e-300).ln()).collect());
            }
            Ok(RecoveryCase { class: *class, designed, native, logp })
        })
        .collect::<anyhow::Result<_>>()?;
    let mut per_case = String::from("input\tclass\tdesigned\tnative\n");
    for (path, c) in a.inputs.iter().zip(&cases) {
        writeln!(
            per_case,
            "{}\t{}\t{}\t{}",
            path.display(),
            serde_json::to_value(c.class)?.as_str().unwrap_or(""),
            bindkit::residue::detokenize(&c.designed),
            bindkit::residue::detokenize(&c.native)
        )?;
    }
    let rows = eval_recovery(&cases)?;
    let mut tsv = String::from("class\tcases\tnsr\tll\tppl\n");
    for (class, r) in &rows {
        let name = serde_json::to_value(class)?;
        writeln!(tsv, "{}\t{}\t{}\t{}\t{}", name.as_str().unwrap_or(""), r.n_cases, fmt_f64(r.nsr), fmt_f64(r.ll), fmt_f64(r.ppl))?;
    }
    run.write(&a.out, tsv.as_bytes())?;
    if let Some(p) = &a.per_case {
        run.write(p, per_case.as_bytes())?;
    }
    run.summarize(json!({ "inputs": a.inputs.len() }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[derive(Args, Serialize, Debug)]
pub struct RankDecoysArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub decoys: Vec<PathBuf>,
    /// Predicted contacts TSV: chain_a, residue_a, chain_b, residue_b,
    /// score. Residues are resolved in the first decoy.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// TSV: rank, input, id, score.
    #[arg(long)]
    pub out: PathBuf,
}

fn rank(g: &Global, a: RankDecoysArgs) -> anyhow::Result<()> {
    if a.top_k == 0 {
        return Err(usage("--top-k must be positive"));
    }
    let mut run = Run::new("bench rank-decoys", g, &a)?;
    let decoys: Vec<Structure> = a.decoys.iter().map(|p| load_structure(&mut run, p)).collect::<anyhow::Result<_>>()?;
    let text = run.read_string(&a.predicted)?;
    let predicted = parse_predicted(&text, &decoys[0]).map_err(|e| anyhow::anyhow!("{}: {e}", a.predicted.display()))?;
    let ranked = rank_decoys(&decoys, &predicted, a.top_k);
    let mut tsv = String::from("rank\tinput\tid\tscore\n");
    for (i, r) in ranked.iter().enumerate() {
        writeln!(tsv, "{}\t{}\t{}\t{}", i + 1, a.decoys[r.index].display(), r.id, r.score)?;
    }
    run.write(&a.out, tsv.as_bytes())?;
    run.summarize(json!({ "decoys": decoys.len(), "predicted": predicted.len() }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

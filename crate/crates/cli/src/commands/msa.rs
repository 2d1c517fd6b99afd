use std::path::{Path, PathBuf};

use anyhow::Context;
use bindkit::container::Container;
use bindkit::msa::{
    block_diagonalize, msa_stats, pair_by_attention, pair_phylogeny, parse_a3m, parse_stockholm, query_similarities,
    similarity_from_attention, write_paired_a3m, Aggregation, AttentionStack, MsaBlock,
};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::io::{usage, Run};
use crate::Global;

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Rank hits within each species by column-attention similarity.
    Colattn,
    /// Rank hits within each species by identity to the query.
    Phylo,
    /// No pairing: each hit on its own gap-padded row.
    Block,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AggArg {
    Sum,
    Mean,
}

#[derive(Args, Serialize, Debug)]
pub struct PairArgs {
    /// A3M, or Stockholm when the extension is .sto/.stk/.stockholm.
    #[arg(long)]
    pub msa1: PathBuf,
    #[arg(long)]
    pub msa2: PathBuf,
    /// Attention stack container for MSA 1 (colattn only).
    #[arg(long)]
    pub attn1: Option<PathBuf>,
    #[arg(long)]
    pub attn2: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "colattn")]
    pub strategy: Strategy,
    #[arg(long, value_enum, default_value = "sum")]
    pub agg: AggArg,
    /// Paired A3M with a `#len1,len2` line and provenance headers.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_msa(run: &mut Run, path: &Path) -> anyhow::Result<MsaBlock> {
    let text = run.read_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let block = match ext.as_str() {
        "sto" | "stk" | "stockholm" => parse_stockholm(&text),
        _ => parse_a3m(&text),
    };
    block.with_context(|| path.display().to_string())
}

fn hit_scores(run: &mut Run, path: &Path, m: &MsaBlock, agg: Aggregation) -> anyhow::Result<Vec<f64>> {
    let bytes = run.read(path)?;
    let c = Container::from_bytes(&bytes).with_context(|| path.display().to_string())?;
    let stack = AttentionStack::from_container(&c).with_context(|| path.display().to_string())?;
    if stack.rows != m.depth() {
        anyhow::bail!("{}: attention covers {} rows, MSA has {}", path.display(), stack.rows, m.depth());
    }
    Ok(query_similarities(&similarity_from_attention(&stack, agg)))
}

pub fn run(g: &Global, a: PairArgs) -> anyhow::Result<()> {
    if a.strategy == Strategy::Colattn && (a.attn1.is_none() || a.attn2.is_none()) {
        return Err(usage("--strategy colattn needs --attn1 and --attn2"));
    }
    let mut run = Run::new("pair-msa", g, &a)?;
    let m1 = load_msa(&mut run, &a.msa1)?;
    let m2 = load_msa(&mut run, &a.msa2)?;
    let agg = match a.agg {
        AggArg::Sum => Aggregation::Sum,
        AggArg::Mean => Aggregation::Mean,
    };
    let paired = match a.strategy {
        Strategy::Colattn => {
            let s1 = hit_scores(&mut run, a.attn1.as_deref().expect("checked"), &m1, agg)?;
            let s2 = hit_scores(&mut run, a.attn2.as_deref().expect("checked"), &m2, agg)?;
            pair_by_attention(&m1, &s1, &m2, &s2)?
        }
        Strategy::Phylo => pair_phylogeny(&m1, &m2)?,
        Strategy::Block => block_diagonalize(&m1, &m2),
    };
    run.write(&a.out, write_paired_a3m(&paired).as_bytes())?;
    let stats = msa_stats(&paired);
    run.summarize(json!({
        "depth": stats.depth,
        "species": stats.n_species,
        "meff": stats.meff,
        "msa1_depth": m1.depth(),
        "msa2_depth": m2.depth(),
    }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{bench, design, model, msa, score, structure};

/// Structure-conditioned binder design toolkit: featurization, toy model,
/// contrastive decoding, scoring, MSA pairing and benchmark curation.
///
/// Every flag can also be set through an environment variable named
/// BINDKIT_<FLAG> (upper case, dashes as underscores). Each run writes a
/// manifest next to its primary output with SHA-256 hashes of every file
/// read and written.
#[derive(Parser)]
#[command(name = "bindkit", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
pub struct Global {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, env = "BINDKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 forces serial execution. 0 uses all cores.
    #[arg(long, global = true, env = "BINDKIT_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Manifest path (default: <primary output>.manifest.json).
    #[arg(long, global = true, env = "BINDKIT_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a PDB or mmCIF file and write its JSON representation.
    DumpStructure(structure::DumpArgs),
    /// Compute model input features and write them as a tensor container.
    Featurize(model::FeaturizeArgs),
    /// Train the toy model on given or synthetic complexes.
    TrainToy(model::TrainArgs),
    /// Teacher-forced per-residue logits as TSV.
    Logits(model::LogitsArgs),
    /// Design binder sequences, optionally contrasting an off-target.
    Design(design::DesignArgs),
    /// Log-likelihood scores for wild-type and mutant binder sequences.
    Score(score::ScoreArgs),
    /// Pair two MSAs into one concatenated alignment.
    PairMsa(msa::PairArgs),
    /// Contact labelling, curation and evaluation tools.
    #[command(subcommand)]
    Bench(bench::BenchCommand),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global()?;
    }
    let g = &cli.global;
    match cli.command {
        Command::DumpStructure(a) => structure::dump(g, a),
        Command::Featurize(a) => model::featurize(g, a),
        Command::TrainToy(a) => model::train(g, a),
        Command::Logits(a) => model::logits(g, a),
        Command::Design(a) => design::run(g, a),
        Command::Score(a) => score::run(g, a),
        Command::PairMsa(a) => msa::run(g, a),
        Command::Bench(c) => bench::run(g, c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("BINDKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<io::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

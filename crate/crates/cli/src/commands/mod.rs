pub mod bench;
pub mod design;
pub mod model;
pub mod msa;
pub mod score;
pub mod structure;

use std::path::{Path, PathBuf};

use anyhow::Context;
use bindkit::container::Container;
use bindkit::model::{ModelConfig, RedNet};
use bindkit::{parse_structure, Format, Structure};
use clap::Args;
use serde::Serialize;

use crate::io::{usage, Run};

#[derive(Args, Serialize, Clone, Debug)]
pub struct ModelArgs {
    /// Weight file. Without one a freshly initialized model seeded from
    /// --seed is used; nothing is downloaded.
    #[arg(long, env = "BINDKIT_WEIGHTS")]
    pub weights: Option<PathBuf>,
    /// Model configuration as TOML key-value pairs for fresh models
    /// (default: the toy configuration).
    #[arg(long, env = "BINDKIT_CONFIG")]
    pub config: Option<PathBuf>,
}

pub fn read_config(run: &mut Run, path: Option<&Path>) -> anyhow::Result<ModelConfig> {
    let Some(path) = path else { return Ok(ModelConfig::toy()) };
    let text = run.read_string(path)?;
    let cfg: ModelConfig = toml::from_str(&text).with_context(|| format!("{}: bad model configuration", path.display()))?;
    cfg.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn load_model(run: &mut Run, args: &ModelArgs, seed: u64) -> anyhow::Result<RedNet> {
    match &args.weights {
        Some(path) => {
            if args.config.is_some() {
                return Err(usage("--config applies to fresh models only; weight files carry their own"));
            }
            let bytes = run.read(path)?;
            let c = Container::from_bytes(&bytes).with_context(|| format!("{}: not a weight file", path.display()))?;
            RedNet::from_container(&c).with_context(|| path.display().to_string())
        }
        None => Ok(RedNet::new(read_config(run, args.config.as_deref())?, seed)?),
    }
}

pub fn load_structure(run: &mut Run, path: &Path) -> anyhow::Result<Structure> {
    let bytes = run.read(path)?;
    let format = Format::from_path(path).with_context(|| path.display().to_string())?;
    parse_structure(&bytes, format).with_context(|| path.display().to_string())
}

/// Marks `chains` as designable; every named chain must exist.
pub fn with_design(s: Structure, chains: &[String], path: &Path) -> anyhow::Result<(Structure, Vec<bool>)> {
    for c in chains {
        if s.chain(c).is_none() {
            let have: Vec<&str> = s.chains.iter().map(|c| c.id.as_str()).collect();
            anyhow::bail!("{}: no chain {c:?} (chains: {})", path.display(), have.join(","));
        }
    }
    let ids: Vec<&str> = chains.iter().map(String::as_str).collect();
    let s = s.with_design_chains(&ids);
    let mask = s.design_mask();
    Ok((s, mask))
}

/// Chain id and author residue label for every residue, in global order.
pub fn residue_labels(s: &Structure) -> Vec<(String, String)> {
    s.residues()
        .map(|(c, r)| {
            let icode = r.insertion.map(String::from).unwrap_or_default();
            (s.chains[c].id.clone(), format!("{}{icode}", r.seq_id))
        })
        .collect()
}

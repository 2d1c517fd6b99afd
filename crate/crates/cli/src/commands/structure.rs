use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use super::load_structure;
use crate::io::{to_json, Run};
use crate::Global;

#[derive(Args, Serialize, Debug)]
pub struct DumpArgs {
    /// PDB (.pdb/.ent) or mmCIF (.cif) file.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON output: id, resolution, method, then chains with residues and
    /// atoms (name, element, position, resolved flag).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn dump(g: &Global, a: DumpArgs) -> anyhow::Result<()> {
    let mut run = Run::new("dump-structure", g, &a)?;
    let s = load_structure(&mut run, &a.input)?;
    run.write(&a.out, &to_json(&s)?)?;
    let chains: Vec<_> = s.chains.iter().map(|c| json!({"id": c.id, "residues": c.len()})).collect();
    run.summarize(json!({ "chains": chains, "residues": s.n_residues() }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

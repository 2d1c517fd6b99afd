use std::fmt::Write as _;
use std::path::PathBuf;

use bindkit::residue::{tokenize, AminoAcid};
use bindkit::scoring::{rank_metrics, score_design, Gain, NdcgConfig, ScoreReport};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::{load_model, load_structure, with_design, ModelArgs};
use crate::io::{fmt_f64, fmt_opt, to_json, usage, Run};
use crate::Global;

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GainArg {
    Exponential,
    Linear,
}

#[derive(Args, Serialize, Debug)]
pub struct ScoreArgs {
    /// Bound complex.
    #[arg(long)]
    pub bound: PathBuf,
    #[arg(long)]
    pub design_chain: String,
    /// Wild-type binder sequence (first FASTA record); defaults to the
    /// sequence in the structure.
    #[arg(long)]
    pub wt: Option<PathBuf>,
    /// Variants, one per line: `name<TAB>spec[<TAB>affinity]`, where spec is
    /// `WT`, comma-separated substitutions such as `A12G` (1-based position
    /// in the binder), or a full binder sequence. `#` starts a comment.
    #[arg(long = "mut")]
    pub mutations: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// TSV: name, sequence, affinity, then ll, ll_global, ll_mt, ll_ref,
    /// ll_cd, ll_cd_ref, n_binder, n_complex, n_mutated. Absent values are NA.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON with Spearman, Kendall τ-b and NDCG of every score column
    /// against the affinity column.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exponential")]
    pub gain: GainArg,
    #[arg(long)]
    pub ndcg_top_k: Option<usize>,
}

struct Variant {
    name: String,
    tokens: Vec<usize>,
    affinity: Option<f64>,
}

fn parse_fasta_first(text: &str) -> Option<String> {
    let mut seq = String::new();
    let mut seen = false;
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('>') {
            if seen {
                break;
            }
            seen = true;
        } else if seen || !line.is_empty() {
            seen = true;
            seq.push_str(line);
        }
    }
    (!seq.is_empty()).then_some(seq)
}

fn apply_spec(spec: &str, wt: &[usize], line: usize) -> anyhow::Result<Vec<usize>> {
    if spec.eq_ignore_ascii_case("wt") {
        return Ok(wt.to_vec());
    }
    let is_sequence = spec.len() == wt.len() && spec.chars().all(|c| c.is_ascii_uppercase());
    if is_sequence && !spec.chars().skip(1).any(|c| c.is_ascii_digit()) {
        return Ok(tokenize(spec));
    }
    let mut out = wt.to_vec();
    for m in spec.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let bad = || anyhow::anyhow!("line {line}: bad substitution {m:?}");
        let mut chars = m.chars();
        let from = chars.next().ok_or_else(bad)?;
        let to = m.chars().last().ok_or_else(bad)?;
        let pos: usize = m[1..m.len() - 1].parse().map_err(|_| bad())?;
        if pos == 0 || pos > wt.len() {
            anyhow::bail!("line {line}: position {pos} outside the {}-residue binder", wt.len());
        }
        let expect = AminoAcid::from_index(wt[pos - 1]).map(|a| a.one_letter());
        if expect != Some(from) {
            anyhow::bail!("line {line}: {m} expects {from} at {pos}, wild type has {}", expect.unwrap_or('X'));
        }
        out[pos - 1] = tokenize(&to.to_string())[0];
    }
    Ok(out)
}

fn parse_variants(text: &str, wt: &[usize]) -> anyhow::Result<Vec<Variant>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() < 2 || cols.len() > 3 {
            anyhow::bail!("line {}: expected name, spec and optional affinity", ln + 1);
        }
        let affinity = match cols.get(2) {
            Some(v) => Some(v.parse::<f64>().map_err(|_| anyhow::anyhow!("line {}: bad affinity {v:?}", ln + 1))?),
            None => None,
        };
        out.push(Variant { name: cols[0].to_string(), tokens: apply_spec(cols[1], wt, ln + 1)?, affinity });
    }
    Ok(out)
}

pub fn run(g: &Global, a: ScoreArgs) -> anyhow::Result<()> {
    let mut run = Run::new("score", g, &a)?;
    let model = load_model(&mut run, &a.model, g.seed)?;
    let (s, mask) = with_design(load_structure(&mut run, &a.bound)?, std::slice::from_ref(&a.design_chain), &a.bound)?;
    let native: Vec<usize> = s.chain(&a.design_chain).expect("validated").tokens();
    let wt = match &a.wt {
        Some(p) => {
            let text = run.read_string(p)?;
            let seq = parse_fasta_first(&text).ok_or_else(|| anyhow::anyhow!("{}: no sequence", p.display()))?;
            let t = tokenize(&seq);
            if t.len() != native.len() {
                anyhow::bail!("{}: wild type has {} residues, chain {} has {}", p.display(), t.len(), a.design_chain, native.len());
            }
            t
        }
        None => native,
    };
    let variants = match &a.mutations {
        Some(p) => {
            let text = run.read_string(p)?;
            parse_variants(&text, &wt).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?
        }
        None => vec![Variant { name: "WT".into(), tokens: wt.clone(), affinity: None }],
    };
    if variants.is_empty() {
        return Err(usage("variant file lists no variants"));
    }

    let reports: Vec<ScoreReport> =
        variants.iter().map(|v| score_design(&model, &s, &mask, &v.tokens, &wt)).collect::<Result<_, _>>()?;
    let mut tsv = String::from("name\tsequence\taffinity");
    for c in ScoreReport::COLUMNS {
        write!(tsv, "\t{c}")?;
    }
    tsv.push('\n');
    for (v, r) in variants.iter().zip(&reports) {
        write!(tsv, "{}\t{}\t{}", v.name, bindkit::residue::detokenize(&v.tokens), fmt_opt(v.affinity))?;
        for c in ScoreReport::COLUMNS {
            match c {
                "n_binder" | "n_complex" | "n_mutated" => write!(tsv, "\t{}", r.get(c).unwrap_or(0.0) as usize)?,
                _ => write!(tsv, "\t{}", fmt_opt(r.get(c)))?,
            }
        }
        tsv.push('\n');
    }
    run.write(&a.out, tsv.as_bytes())?;

    if let Some(path) = &a.metrics {
        let cfg = NdcgConfig {
            gain: match a.gain {
                GainArg::Exponential => Gain::Exponential,
                GainArg::Linear => Gain::Linear,
            },
            top_k: a.ndcg_top_k,
        };
        let mut out = Map::new();
        for c in ScoreReport::COLUMNS.iter().filter(|c| c.starts_with("ll")) {
            let pairs: Vec<(f64, f64)> =
                variants.iter().zip(&reports).filter_map(|(v, r)| Some((r.get(c)?, v.affinity?))).collect();
            let value = match rank_metrics(&pairs, &cfg) {
                Ok(m) => serde_json::to_value(m)?,
                Err(e) => json!({ "error": e.to_string(), "n": pairs.len() }),
            };
            out.insert(c.to_string(), value);
        }
        run.write(path, &to_json(&Value::Object(out))?)?;
    }
    let best = reports.iter().map(|r| r.ll).fold(f64::NEG_INFINITY, f64::max);
    run.summarize(json!({ "variants": variants.len(), "best_ll": fmt_f64(best) }));
    run.finish(g.manifest.as_deref())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutions_and_sequences() {
        let wt = tokenize("ACDEF");
        assert_eq!(apply_spec("WT", &wt, 1).unwrap(), wt);
        assert_eq!(apply_spec("C2G,F5A", &wt, 1).unwrap(), tokenize("AGDEA"));
        assert_eq!(apply_spec("GGGGG", &wt, 1).unwrap(), tokenize("GGGGG"));
        assert!(apply_spec("D2G", &wt, 1).is_err());
        assert!(apply_spec("A9G", &wt, 1).is_err());
        assert_eq!(parse_fasta_first(">x\nAC\nDE\n>y\nGG\n").as_deref(), Some("ACDE"));
    }
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bindkit::geometry::RigidMotion;
use bindkit::structure::write_pdb;
use bindkit::synth::{random_complex, selectivity_corpus};
use bindkit::{Structure, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bindkit"));
    for (k, _) in std::env::vars() {
        if k.starts_with("BINDKIT_") {
            c.env_remove(k);
        }
    }
    c
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn bindkit")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "bindkit {} failed ({:?}):\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Binder chain A next to target chain B.
pub fn complex() -> Structure {
    random_complex(&mut ChaCha8Rng::seed_from_u64(1), "CPX", &[16, 20], 10.0)
}

/// The same binder against a displaced copy of the target.
pub fn offtarget(s: &Structure) -> Structure {
    let mut off = s.clone();
    let shift = RigidMotion::from_axis_angle(Vec3::z(), 0.3, Vec3::new(2.0, -1.5, 3.0));
    off.chains[1] = s.transformed(&shift).chains[1].clone();
    off
}

const MSA1: &str = "\
>query
ACDEFGHIK
>sp|P1|A1_HUMAN
ACDEFGHIR
>sp|P2|A2_HUMAN
ACDQFGHIK
>sp|P3|A3_MOUSE
AC-EFGHLK
>sp|P4|A4_YEAST
WCDEFGHIK
";

const MSA2: &str = "\
>query
MKLVW
>sp|Q1|B1_HUMAN
MKLVF
>sp|Q2|B2_MOUSE
MRLVW
>sp|Q3|B3_HUMAN
MK-VW
>sp|Q4|B4_ECOLI
MKLIW
";

/// Writes every input file the CLI commands need and returns their paths
/// relative to `dir`.
pub struct Fixtures {
    pub complex: &'static str,
    pub off: &'static str,
    pub corpus: Vec<String>,
    pub msa1: &'static str,
    pub msa2: &'static str,
    pub variants: &'static str,
    pub selectivity: &'static str,
    pub predicted: &'static str,
}

pub fn write_fixtures(dir: &Path) -> Fixtures {
    let s = complex();
    let put = |name: &str, text: &str| std::fs::write(dir.join(name), text).unwrap();
    put("complex.pdb", &write_pdb(&s));
    put("off.pdb", &write_pdb(&offtarget(&s)));
    let corpus: Vec<String> = selectivity_corpus(7)
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let name = format!("sel{i}.pdb");
            put(&name, &write_pdb(e));
            name
        })
        .collect();
    put("msa1.a3m", MSA1);
    put("msa2.a3m", MSA2);

    let seq = s.chains[0].sequence();
    let first = seq.chars().next().unwrap();
    let sub = if first == 'A' { 'G' } else { 'A' };
    let last = seq.chars().last().unwrap();
    let sub2 = if last == 'W' { 'F' } else { 'W' };
    put(
        "variants.tsv",
        &format!("WT\tWT\t1.0\nm1\t{first}1{sub}\t0.4\nm2\t{first}1{sub},{last}{}{sub2}\t2.5\n", seq.len()),
    );
    put("selectivity.tsv", "name\tscore_on\tscore_off\nc1\t-30\t-12\nc2\t-8\t-6\nc3\t-2\t-9\n");
    let mut predicted = String::from("chain_a\tresidue_a\tchain_b\tresidue_b\tscore\n");
    for i in 1..=8 {
        predicted.push_str(&format!("A\t{i}\tB\t{}\t{}\n", 9 - i, 1.0 / i as f64));
    }
    put("predicted.tsv", &predicted);
    Fixtures {
        complex: "complex.pdb",
        off: "off.pdb",
        corpus,
        msa1: "msa1.a3m",
        msa2: "msa2.a3m",
        variants: "variants.tsv",
        selectivity: "selectivity.tsv",
        predicted: "predicted.tsv",
    }
}

/// One invocation of every command, writing into `out/`.
pub fn invocations(f: &Fixtures) -> Vec<Vec<String>> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let mut curate = s(&["bench", "curate", "--out", "out/curate.json", "--cases", "out/cases.tsv", "--inputs"]);
    curate.extend(f.corpus.iter().cloned());
    vec![
        s(&["dump-structure", "--input", f.complex, "--out", "out/structure.json"]),
        s(&["featurize", "--input", f.complex, "--design-chains", "A", "--out", "out/features.bktc"]),
        s(&["train-toy", "--synthetic", "2", "--synthetic-lengths", "8,8", "--steps", "3", "--out", "out/weights.bktc", "--losses", "out/losses.tsv"]),
        s(&["logits", "--input", f.complex, "--design-chains", "A", "--order", "random", "--out", "out/logits.tsv"]),
        s(&["design", "--on", f.complex, "--off", f.off, "--design-chain", "A", "--temp", "1.0", "--n", "3", "--out", "out/design.fasta", "--trace", "out/trace.json"]),
        s(&["design", "--on", f.complex, "--design-chain", "A", "--mode", "contrast-unbound", "--temp", "0.5", "--n", "2", "--out", "out/unbound.fasta"]),
        s(&["score", "--bound", f.complex, "--design-chain", "A", "--mut", f.variants, "--out", "out/scores.tsv", "--metrics", "out/metrics.json"]),
        s(&["pair-msa", "--msa1", f.msa1, "--msa2", f.msa2, "--strategy", "phylo", "--out", "out/paired.a3m"]),
        s(&["bench", "contacts", "--input", f.complex, "--def", "ca10", "--predicted", f.predicted, "--out", "out/contacts.tsv"]),
        curate,
        s(&["bench", "selectivity", "--input", f.selectivity, "--out", "out/selectivity.tsv"]),
        s(&["bench", "recovery", "--inputs", f.complex, f.off, "--out", "out/recovery.tsv", "--per-case", "out/recovery_cases.tsv"]),
        s(&["bench", "rank-decoys", "--decoys", f.complex, f.off, "--predicted", f.predicted, "--top-k", "5", "--out", "out/decoys.tsv"]),
    ]
}

/// Sorted (path, sha256) of every file under `dir`.
pub fn hash_tree(dir: &Path) -> Vec<(PathBuf, String)> {
    use sha2::{Digest, Sha256};
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let h = hex::encode(Sha256::digest(std::fs::read(&p).unwrap()));
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), h));
            }
        }
    }
    out.sort();
    out
}

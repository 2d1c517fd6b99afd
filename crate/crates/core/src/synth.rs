//! Ideal-geometry synthetic structures for tests, benchmarks and toy training.
//!
//! Backbones are grown with NeRF from (φ, ψ) pairs using standard bond
//! lengths and angles. Side chains follow a generic walk: each atom hangs off
//! the previous atom one branch level up with tetrahedral-ish geometry. They
//! are chemically plausible in composition and count, not in conformation.

use crate::geometry::{place_atom, RigidMotion, Vec3};
use crate::residue::AminoAcid;
use crate::structure::{Atom, Chain, ChainRole, Residue, Structure};
use rand::Rng;

const N_CA: f64 = 1.458;
const CA_C: f64 = 1.525;
const C_N: f64 = 1.329;
const C_O: f64 = 1.231;

fn deg(x: f64) -> f64 {
    x.to_radians()
}

pub fn helix_angles(n: usize) -> Vec<(f64, f64)> {
    vec![(-57.0, -47.0); n]
}

pub fn strand_angles(n: usize) -> Vec<(f64, f64)> {
    vec![(-120.0, 130.0); n]
}

/// Mixed secondary structure: segments of helix, strand and loop.
pub fn random_angles<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(3..9).min(n - out.len());
        let kind = rng.random_range(0..3);
        for _ in 0..len {
            let (phi, psi) = match kind {
                0 => (-57.0, -47.0),
                1 => (-120.0, 130.0),
                _ => (rng.random_range(-160.0..-50.0), rng.random_range(-60.0..160.0)),
            };
            out.push((phi + rng.random_range(-8.0..8.0), psi + rng.random_range(-8.0..8.0)));
        }
    }
    out
}

fn greek_depth(name: &str) -> usize {
    match name.chars().nth(1) {
        Some('B') => 1,
        Some('G') => 2,
        Some('D') => 3,
        Some('E') => 4,
        Some('Z') => 5,
        Some('H') => 6,
        _ => 0,
    }
}

fn build_sidechain(aa: AminoAcid, n: Vec3, ca: Vec3, c: Vec3) -> Vec<(&'static str, Vec3)> {
    let names = aa.sidechain_atoms();
    let mut placed: Vec<(&'static str, Vec3, usize)> = Vec::new(); // (name, pos, parent idx)
    // Virtual ancestors: index 0 = C, 1 = N, 2 = CA.
    let anc = [c, n, ca];
    for (k, &name) in names.iter().enumerate() {
        if k == 0 {
            let cb = place_atom(&c, &n, &ca, 1.53, deg(110.5), deg(-122.55));
            placed.push((name, cb, usize::MAX));
            continue;
        }
        let depth = greek_depth(name);
        let parent = placed.iter().rposition(|(nm, _, _)| greek_depth(nm) + 1 == depth).unwrap_or(placed.len() - 1);
        let siblings = placed.iter().filter(|(nm, _, p)| *p == parent && greek_depth(nm) == depth).count();
        let p = placed[parent].1;
        let (g, gg) = match placed[parent].2 {
            usize::MAX => (anc[2], anc[1]),
            gp => {
                let g = placed[gp].1;
                let gg = match placed[gp].2 {
                    usize::MAX => anc[2],
                    ggp => placed[ggp].1,
                };
                (g, gg)
            }
        };
        let torsion = deg(180.0 + 120.0 * siblings as f64 - 60.0 * (depth % 2) as f64);
        let pos = place_atom(&gg, &g, &p, 1.52, deg(111.0), torsion);
        placed.push((name, pos, parent));
    }
    placed.into_iter().map(|(n, p, _)| (n, p)).collect()
}

/// Builds a chain with full heavy-atom residues from one-letter codes and
/// per-residue (φ, ψ) in degrees. Unknown letters become `UNK` backbones.
pub fn ideal_chain(id: &str, seq: &str, angles: &[(f64, f64)]) -> Chain {
    let aas: Vec<AminoAcid> = seq.chars().map(AminoAcid::from_one_letter).collect();
    assert_eq!(aas.len(), angles.len(), "one (phi, psi) per residue");
    let mut bb: Vec<(Vec3, Vec3, Vec3)> = Vec::with_capacity(aas.len());
    let n0 = Vec3::zeros();
    let ca0 = Vec3::new(N_CA, 0.0, 0.0);
    let a = deg(111.2);
    let c0 = ca0 + CA_C * Vec3::new(-a.cos(), a.sin(), 0.0);
    bb.push((n0, ca0, c0));
    for i in 1..aas.len() {
        let (n_p, ca_p, c_p) = bb[i - 1];
        let n = place_atom(&n_p, &ca_p, &c_p, C_N, deg(116.2), deg(angles[i - 1].1));
        let ca = place_atom(&ca_p, &c_p, &n, N_CA, deg(121.7), deg(180.0));
        let c = place_atom(&c_p, &n, &ca, CA_C, deg(111.2), deg(angles[i].0));
        bb.push((n, ca, c));
    }
    let residues = aas
        .iter()
        .enumerate()
        .map(|(i, &aa)| {
            let (n, ca, c) = bb[i];
            let o = match bb.get(i + 1) {
                Some((n_next, _, _)) => place_atom(n_next, &ca, &c, C_O, deg(120.5), deg(180.0)),
                None => place_atom(&n, &ca, &c, C_O, deg(120.5), deg(angles[i].1 + 180.0)),
            };
            let mut atoms = vec![
                Atom::new("N", "N", n),
                Atom::new("CA", "C", ca),
                Atom::new("C", "C", c),
                Atom::new("O", "O", o),
            ];
            for (name, pos) in build_sidechain(aa, n, ca, c) {
                atoms.push(Atom::new(name, &name[..1], pos));
            }
            Residue {
                index: i,
                seq_id: i as i32 + 1,
                insertion: None,
                name: aa.three_letter().to_string(),
                aa,
                atoms,
            }
        })
        .collect();
    Chain { id: id.to_string(), residues, role: ChainRole::Target }
}

pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| AminoAcid::canonical()[rng.random_range(0..20)].one_letter()).collect()
}

fn centroid(chain: &Chain) -> Vec3 {
    let cas: Vec<Vec3> = chain.residues.iter().filter_map(|r| r.ca()).collect();
    cas.iter().fold(Vec3::zeros(), |a, b| a + b) / cas.len().max(1) as f64
}

pub fn move_chain(chain: &mut Chain, motion: &RigidMotion) {
    for r in &mut chain.residues {
        for a in &mut r.atoms {
            a.pos = motion.apply(&a.pos);
        }
    }
}

/// Translates `chain` so its Cα centroid sits `offset` away from `anchor`'s.
pub fn place_next_to(anchor: &Chain, chain: &mut Chain, offset: Vec3) {
    let shift = centroid(anchor) + offset - centroid(chain);
    move_chain(chain, &RigidMotion { rotation: crate::geometry::Mat3::identity(), translation: shift });
}

/// A random single-chain structure of length `n`.
pub fn random_monomer<R: Rng + ?Sized>(rng: &mut R, id: &str, n: usize) -> Structure {
    let seq = random_sequence(rng, n);
    let chain = ideal_chain("A", &seq, &random_angles(rng, n));
    Structure { id: id.to_string(), chains: vec![chain], resolution: Some(2.0), method: None }
}

/// Two helical chains packed side by side with Cα centroids `gap` Å apart.
pub fn helix_dimer(seq_a: &str, seq_b: &str, gap: f64) -> Structure {
    let a = ideal_chain("A", seq_a, &helix_angles(seq_a.len()));
    let mut b = ideal_chain("B", seq_b, &helix_angles(seq_b.len()));
    place_next_to(&a, &mut b, Vec3::new(0.0, gap, 0.0));
    Structure { id: "DIMER".into(), chains: vec![a, b], resolution: Some(2.0), method: None }
}

/// A random multi-chain complex: chain lengths given, chains stacked along y
/// with centroid spacing `gap`.
pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, id: &str, lengths: &[usize], gap: f64) -> Structure {
    let ids = ["A", "B", "C", "D", "E", "F"];
    let mut chains: Vec<Chain> = Vec::new();
    for (k, &n) in lengths.iter().enumerate() {
        let seq = random_sequence(rng, n);
        let mut c = ideal_chain(ids[k % ids.len()], &seq, &random_angles(rng, n));
        if let Some(first) = chains.first() {
            place_next_to(first, &mut c, Vec3::new(0.0, gap * k as f64, 0.0));
        }
        chains.push(c);
    }
    Structure { id: id.to_string(), chains, resolution: Some(2.0), method: None }
}

fn helix_axis(chain: &Chain) -> Vec3 {
    let cas: Vec<Vec3> = chain.residues.iter().filter_map(|r| r.ca()).collect();
    (cas[cas.len() - 1] - cas[0]).normalize()
}

/// A corpus of six two-chain entries (binder `A`, target `B`) built around
/// one 50-residue helical binder with planted outcomes for selective-binder
/// curation:
///
/// 0. the intended on-target complex;
/// 1. the same binder on a different target, bound on the opposite face;
/// 2. the same binder on the target of entry 0;
/// 3. a binder sharing only its 42-residue core with entry 0, shifted so the
///    alignment covers 84% of it;
/// 4. the binder with its first 8 residues all mutated (84% identity), kept
///    in the cluster through entry 3;
/// 5. the same binder sequence folded as an extended strand.
pub fn selectivity_corpus(seed: u64) -> Vec<Structure> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let canon = AminoAcid::canonical();
    let core = random_sequence(&mut rng, 42);
    let head = random_sequence(&mut rng, 8);
    let tail = random_sequence(&mut rng, 8);
    let mutated: String = head
        .chars()
        .map(|c| {
            let i = canon.iter().position(|a| a.one_letter() == c).unwrap_or(0);
            canon[(i + 7) % 20].one_letter()
        })
        .collect();
    let targets: Vec<String> = (0..5).map(|_| random_sequence(&mut rng, 50)).collect();
    let binder = format!("{head}{core}");
    let plan: [(String, bool, usize, f64); 6] = [
        (binder.clone(), true, 0, 1.0),
        (binder.clone(), true, 1, -1.0),
        (binder.clone(), true, 0, 1.0),
        (format!("{core}{tail}"), true, 2, 1.0),
        (format!("{mutated}{core}"), true, 3, 1.0),
        (binder, false, 4, 1.0),
    ];
    plan.iter()
        .enumerate()
        .map(|(k, (seq, helical, target, side))| {
            let angles = if *helical { helix_angles(seq.len()) } else { strand_angles(seq.len()) };
            let a = ideal_chain("A", seq, &angles);
            let mut b = ideal_chain("B", &targets[*target], &helix_angles(50));
            let axis = helix_axis(&a);
            let normal = axis.cross(&Vec3::z()).try_normalize(1e-6).unwrap_or_else(|| axis.cross(&Vec3::x()).normalize());
            let b_axis = helix_axis(&b);
            let align = nalgebra::Rotation3::rotation_between(&b_axis, &axis)
                .unwrap_or_else(nalgebra::Rotation3::identity)
                .into_inner();
            move_chain(&mut b, &RigidMotion { rotation: align, translation: Vec3::zeros() });
            place_next_to(&a, &mut b, normal * (12.5 * side));
            let mut a = a;
            a.role = ChainRole::Design;
            Structure { id: format!("SEL{k}"), chains: vec![a, b], resolution: Some(2.0), method: None }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_backbone_geometry() {
        let c = ideal_chain("A", "ACDEFGHIKL", &helix_angles(10));
        for w in c.residues.windows(2) {
            let d = (w[1].pos("N").unwrap() - w[0].pos("C").unwrap()).norm();
            assert!((d - C_N).abs() < 1e-9);
        }
        // α-helix rise ≈ 1.5 Å per residue, i→i+3 Cα ≈ 5 Å.
        let d = (c.residues[3].ca().unwrap() - c.residues[0].ca().unwrap()).norm();
        assert!((4.5..5.7).contains(&d), "{d}");
        for r in &c.residues {
            assert_eq!(r.atoms.len(), r.aa.heavy_atoms().len());
        }
    }
}

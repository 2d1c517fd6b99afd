//! Fixtures shared by the benchmarks.

use bindkit::synth::random_complex;
use bindkit::Structure;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-chain complex with chain A marked for design.
pub fn complex(seed: u64, binder: usize, target: usize) -> Structure {
    random_complex(&mut ChaCha8Rng::seed_from_u64(seed), "BENCH", &[binder, target], 10.0).with_design_chains(&["A"])
}

/// `depth` rows of width `width` scattered around a few ancestral sequences.
pub fn msa_rows(seed: u64, depth: usize, width: usize) -> Vec<Vec<u8>> {
    use rand::Rng;
    const ALPHABET: &[u8] = b"ACDEFGHIKLMNPQRSTVWY-";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots: Vec<Vec<u8>> = (0..4).map(|_| (0..width).map(|_| ALPHABET[rng.random_range(0..20)]).collect()).collect();
    (0..depth)
        .map(|_| {
            let mut row = roots[rng.random_range(0..roots.len())].clone();
            for x in &mut row {
                if rng.random_bool(0.3) {
                    *x = ALPHABET[rng.random_range(0..ALPHABET.len())];
                }
            }
            row
        })
        .collect()
}

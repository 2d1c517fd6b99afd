use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Vec3;
use crate::structure::Structure;

/// Independent Gaussian displacement (std `sigma` Å per axis) of every
/// resolved atom, reproducible from `seed`.
pub fn add_coordinate_noise(s: &Structure, sigma: f64, seed: u64) -> Structure {
    let mut out = s.clone();
    if sigma <= 0.0 {
        return out;
    }
    let dist = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for chain in &mut out.chains {
        for res in &mut chain.residues {
            for atom in res.atoms.iter_mut().filter(|a| a.resolved) {
                atom.pos += Vec3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng));
            }
        }
    }
    out
}

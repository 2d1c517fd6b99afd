//! Small 3-D geometry toolkit: rigid motions, NeRF placement, Kabsch.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A proper rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RigidMotion {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    /// Uniformly random rotation plus a translation with components in
    /// `[-max_shift, max_shift]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_shift: f64) -> Self {
        // Uniform unit quaternion (Shoemake).
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let q = nalgebra::Quaternion::new(
            (1.0 - u1).sqrt() * (tau * u2).sin(),
            (1.0 - u1).sqrt() * (tau * u2).cos(),
            u1.sqrt() * (tau * u3).sin(),
            u1.sqrt() * (tau * u3).cos(),
        );
        let rotation = *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix();
        let translation = Vec3::new(
            rng.random_range(-max_shift..=max_shift),
            rng.random_range(-max_shift..=max_shift),
            rng.random_range(-max_shift..=max_shift),
        );
        Self { rotation, translation }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self { rotation: *rot.matrix(), translation }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }
}

/// Places atom D given A, B, C, the bond length |CD|, the angle B-C-D and
/// the dihedral A-B-C-D (radians).
pub fn place_atom(a: &Vec3, b: &Vec3, c: &Vec3, bond: f64, angle: f64, torsion: f64) -> Vec3 {
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let d2 = Vec3::new(
        -bond * angle.cos(),
        bond * angle.sin() * torsion.cos(),
        bond * angle.sin() * torsion.sin(),
    );
    c + bc * d2.x + m * d2.y + n * d2.z
}

pub fn dihedral(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    let b0 = a - b;
    let b1 = (c - b).normalize();
    let b2 = d - c;
    let v = b0 - b1 * b0.dot(&b1);
    let w = b2 - b1 * b2.dot(&b1);
    let x = v.dot(&w);
    let y = b1.cross(&v).dot(&w);
    y.atan2(x)
}

#[derive(Debug, Clone)]
pub struct Superposition {
    /// Rotation and translation mapping `mobile` onto `reference`.
    pub motion: RigidMotion,
    pub rmsd: f64,
}

/// Least-squares superposition of `mobile` onto `reference` (Kabsch).
/// Returns `None` for empty or mismatched inputs.
pub fn kabsch(reference: &[Vec3], mobile: &[Vec3]) -> Option<Superposition> {
    if reference.is_empty() || reference.len() != mobile.len() {
        return None;
    }
    let n = reference.len() as f64;
    let c_ref = reference.iter().fold(Vec3::zeros(), |acc, x| acc + x) / n;
    let c_mob = mobile.iter().fold(Vec3::zeros(), |acc, x| acc + x) / n;
    let mut h = Mat3::zeros();
    for (r, m) in reference.iter().zip(mobile) {
        h += (m - c_mob) * (r - c_ref).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let rotation = v * correction * u.transpose();
    let translation = c_ref - rotation * c_mob;
    let motion = RigidMotion { rotation, translation };
    let sq: f64 = reference
        .iter()
        .zip(mobile)
        .map(|(r, m)| (motion.apply(m) - r).norm_squared())
        .sum();
    Some(Superposition { motion, rmsd: (sq / n).sqrt() })
}

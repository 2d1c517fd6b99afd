use super::FeatureError;
use crate::geometry::{Mat3, Vec3};
use crate::structure::Residue;
use serde::{Deserialize, Serialize};

/// Orthonormal right-handed frame at Cα. Columns of `rotation` are the x,
/// y, z axes in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub rotation: Mat3,
}

impl LocalFrame {
    /// x along Cα→C, z along (Cα−N)×(C−Cα), y = z×x.
    pub fn from_backbone(n: &Vec3, ca: &Vec3, c: &Vec3, residue: i32) -> Result<Self, FeatureError> {
        let x_raw = c - ca;
        let z_raw = (ca - n).cross(&x_raw);
        if z_raw.norm() < 1e-8 || x_raw.norm() < 1e-12 {
            return Err(FeatureError::DegenerateFrame { residue });
        }
        let x = x_raw.normalize();
        let z = z_raw.normalize();
        let y = z.cross(&x);
        Ok(Self { origin: *ca, rotation: Mat3::from_columns(&[x, y, z]) })
    }

    /// Coordinates of `p` in this frame: Rᵀ(p − origin).
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.origin)
    }
}

pub fn local_frame(residue: &Residue) -> Result<LocalFrame, FeatureError> {
    let get = |name: &'static str| {
        residue.pos(name).ok_or(FeatureError::Structure(crate::structure::StructureError::FrameUnavailable {
            chain: String::new(),
            residue: residue.seq_id,
            atom: name,
        }))
    };
    LocalFrame::from_backbone(&get("N")?, &get("CA")?, &get("C")?, residue.seq_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidMotion;
    use rand::SeedableRng;

    #[test]
    fn hand_example() {
        let f = LocalFrame::from_backbone(
            &Vec3::new(-0.5, 1.3, 0.0),
            &Vec3::zeros(),
            &Vec3::new(1.52, 0.0, 0.0),
            1,
        )
        .unwrap();
        // (Cα−N)×(C−Cα) = (0.5,−1.3,0)×(1.52,0,0) = (0,0,1.976)
        assert!((f.rotation.column(0) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((f.rotation.column(1) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((f.rotation.column(2) - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert!((f.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let r = LocalFrame::from_backbone(&Vec3::new(-1.0, 0.0, 0.0), &Vec3::zeros(), &Vec3::new(1.5, 0.0, 0.0), 7);
        assert_eq!(r, Err(FeatureError::DegenerateFrame { residue: 7 }));
    }

    #[test]
    fn frame_is_equivariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (n, ca, c) = (Vec3::new(-0.5, 1.3, 0.2), Vec3::new(0.1, 0.0, -0.3), Vec3::new(1.52, 0.2, 0.0));
        let f = LocalFrame::from_backbone(&n, &ca, &c, 1).unwrap();
        for _ in 0..10 {
            let m = RigidMotion::random(&mut rng, 20.0);
            let g = LocalFrame::from_backbone(&m.apply(&n), &m.apply(&ca), &m.apply(&c), 1).unwrap();
            assert!((g.rotation - m.rotation * f.rotation).norm() < 1e-12);
            assert!((g.origin - m.apply(&f.origin)).norm() < 1e-12);
            let r = g.rotation;
            assert!((r * r.transpose() - Mat3::identity()).norm() < 1e-9);
        }
    }
}

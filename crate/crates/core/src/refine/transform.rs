use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::TriMesh;
use crate::obb::Obb;

/// `x ↦ s·R·x + T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRepr {
    scale: f64,
    /// `[qx, qy, qz, qw]`.
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl TryFrom<TransformRepr> for SimilarityTransform {
    type Error = String;

    fn try_from(r: TransformRepr) -> Result<Self, String> {
        if !(r.scale > 0.0 && r.scale.is_finite()) {
            return Err("scale must be positive".into());
        }
        let [x, y, z, w] = r.rotation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(format!("rotation quaternion has norm {}", q.norm()));
        }
        Ok(SimilarityTransform {
            scale: r.scale,
            rotation: UnitQuaternion::new_normalize(q),
            translation: Vector3::from(r.translation),
        })
    }
}

impl From<SimilarityTransform> for TransformRepr {
    fn from(t: SimilarityTransform) -> Self {
        let q = t.rotation.quaternion();
        TransformRepr {
            scale: t.scale,
            rotation: [q.i, q.j, q.k, q.w],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        SimilarityTransform {
            scale,
            rotation,
            translation,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Scale and rotation about `pivot`, then translation by `delta`.
    pub fn about(pivot: &Point3<f64>, scale: f64, rotation: UnitQuaternion<f64>, delta: Vector3<f64>) -> Self {
        let translation = pivot.coords - rotation * pivot.coords * scale + delta;
        SimilarityTransform::new(scale, rotation, translation)
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        if self.is_identity() {
            return *p;
        }
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        if self.is_identity() {
            return mesh.clone();
        }
        mesh.map_vertices(|p| self.apply_point(p))
    }

    pub fn apply_obb(&self, b: &Obb) -> Obb {
        if self.is_identity() {
            return *b;
        }
        Obb::new(
            self.apply_point(&b.center),
            b.half_extents * self.scale,
            self.rotation * b.rotation,
        )
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * first.scale,
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation * self.scale + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let r = self.rotation.inverse();
        SimilarityTransform {
            scale: 1.0 / self.scale,
            rotation: r,
            translation: -(r * self.translation) / self.scale,
        }
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::icosphere;

    fn sample() -> (SimilarityTransform, SimilarityTransform) {
        (
            SimilarityTransform::new(
                1.3,
                UnitQuaternion::from_euler_angles(0.2, -0.4, 0.9),
                Vector3::new(0.1, -0.2, 0.3),
            ),
            SimilarityTransform::new(
                0.7,
                UnitQuaternion::from_euler_angles(-1.0, 0.3, 0.1),
                Vector3::new(-0.5, 0.4, 0.0),
            ),
        )
    }

    #[test]
    fn identity_is_bit_exact() {
        let m = icosphere(Point3::new(-0.0, 0.1, 1.0 / 3.0), 0.3, 1);
        assert_eq!(SimilarityTransform::identity().apply_mesh(&m), m);
    }

    #[test]
    fn doubling_unit_cube_box() {
        let b = Obb::axis_aligned(Point3::origin(), Vector3::repeat(0.5));
        let t = SimilarityTransform::new(2.0, UnitQuaternion::identity(), Vector3::zeros());
        let out = t.apply_obb(&b);
        assert_eq!(out.half_extents, Vector3::repeat(1.0));
        assert!((out.volume() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn composition_and_inverse() {
        let (a, b) = sample();
        let p = Point3::new(0.3, 0.9, -1.2);
        let seq = a.apply_point(&b.apply_point(&p));
        assert!((a.after(&b).apply_point(&p) - seq).norm() < 1e-12);
        assert!((a.inverse().apply_point(&a.apply_point(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn pivot_is_fixed() {
        let c = Point3::new(1.0, 2.0, 3.0);
        let t = SimilarityTransform::about(
            &c,
            1.5,
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
            Vector3::zeros(),
        );
        assert!((t.apply_point(&c) - c).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let (a, _) = sample();
        let s = serde_json::to_string(&a).unwrap();
        let back: SimilarityTransform = serde_json::from_str(&s).unwrap();
        assert!((back.translation - a.translation).norm() == 0.0 && back.scale == a.scale);
        assert!(serde_json::from_str::<SimilarityTransform>(
            r#"{"scale":0,"rotation":[0,0,0,1],"translation":[0,0,0]}"#
        )
        .is_err());
    }
}

//! Oriented bounding boxes.
//!
//! An [`Obb`] is stored as center, half-extents and a unit quaternion mapping
//! the box frame to world space. Boxes produced by the fitting routines are
//! canonical: half-extents sorted in descending order, a right-handed frame,
//! each of the first two axes signed so its largest component is positive,
//! and a quaternion with non-negative scalar part.

mod exact;

use nalgebra::{Matrix3, Point3, Rotation3, SymmetricEigen, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{primitives::box_mesh, Aabb, TriMesh};

pub use exact::{fit_min_obb, min_obb, Degeneracy, ObbFit};

/// Smallest half-extent a fitted box is given along a degenerate axis.
pub const THIN_HALF_EXTENT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObbRepr", into = "ObbRepr")]
pub struct Obb {
    pub center: Point3<f64>,
    pub half_extents: Vector3<f64>,
    /// Box frame to world.
    pub rotation: UnitQuaternion<f64>,
}

/// Wire form: `{"center":[x,y,z],"half_extents":[a,b,c],"rotation":[qx,qy,qz,qw]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObbRepr {
    center: [f64; 3],
    half_extents: [f64; 3],
    rotation: [f64; 4],
}

impl TryFrom<ObbRepr> for Obb {
    type Error = String;

    fn try_from(r: ObbRepr) -> Result<Self, String> {
        if !r
            .center
            .iter()
            .chain(&r.half_extents)
            .chain(&r.rotation)
            .all(|v| v.is_finite())
        {
            return Err("box contains a non-finite value".into());
        }
        if r.half_extents.iter().any(|&h| h <= 0.0) {
            return Err("half_extents must be positive".into());
        }
        let [x, y, z, w] = r.rotation;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(format!("rotation quaternion has norm {}, expected 1", q.norm()));
        }
        Ok(Obb {
            center: Point3::from(r.center),
            half_extents: Vector3::from(r.half_extents),
            rotation: UnitQuaternion::new_normalize(q),
        })
    }
}

impl From<Obb> for ObbRepr {
    fn from(b: Obb) -> Self {
        let q = b.rotation.quaternion();
        ObbRepr {
            center: [b.center.x, b.center.y, b.center.z],
            half_extents: [b.half_extents.x, b.half_extents.y, b.half_extents.z],
            rotation: [q.i, q.j, q.k, q.w],
        }
    }
}

impl Obb {
    pub fn new(center: Point3<f64>, half_extents: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Obb {
            center,
            half_extents,
            rotation,
        }
    }

    pub fn axis_aligned(center: Point3<f64>, half_extents: Vector3<f64>) -> Self {
        Obb::new(center, half_extents, UnitQuaternion::identity())
    }

    pub fn from_aabb(bb: &Aabb) -> Self {
        let he = (bb.extent() * 0.5).map(|h| h.max(THIN_HALF_EXTENT));
        Obb::axis_aligned(bb.center(), he)
    }

    /// Builds a canonical box from three orthonormal world-space axes (the
    /// columns of `axes`) and the matching half-extents.
    pub fn from_axes(center: Point3<f64>, axes: &Matrix3<f64>, half_extents: Vector3<f64>) -> Self {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| half_extents[b].total_cmp(&half_extents[a]));
        let sign_fixed = |v: Vector3<f64>| {
            let k = v.iamax();
            if v[k] < 0.0 {
                -v
            } else {
                v
            }
        };
        let a0 = sign_fixed(axes.column(order[0]).into_owned());
        let a1 = sign_fixed(axes.column(order[1]).into_owned());
        let a2 = a0.cross(&a1);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[a0, a1, a2]));
        let mut q = UnitQuaternion::from_rotation_matrix(&rot);
        if q.w < 0.0 {
            q = UnitQuaternion::new_unchecked(-q.into_inner());
        }
        let he = Vector3::new(half_extents[order[0]], half_extents[order[1]], half_extents[order[2]]);
        Obb::new(center, he, q)
    }

    /// Re-expresses the box in canonical form without changing the region.
    pub fn canonical(&self) -> Obb {
        Obb::from_axes(self.center, &self.axes(), self.half_extents)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Box axes as the columns of a rotation matrix.
    pub fn axes(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p - self.center))
    }

    /// True when `p` lies within the box inflated by `tol` on every axis.
    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|k| l[k].abs() <= self.half_extents[k] + tol)
    }

    /// Corners in bit order: corner `i` takes the `+` side of local axis `k`
    /// when bit `k` of `i` is set, the `-` side otherwise. Corner 0 is
    /// `(-hx,-hy,-hz)` and corner 7 is `(+hx,+hy,+hz)`.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        let h = self.half_extents;
        std::array::from_fn(|i| {
            let s = |bit: usize| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
            self.center + self.rotation * Vector3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z)
        })
    }

    pub fn aabb(&self) -> Aabb {
        let r = self.axes().abs();
        let ext = r * self.half_extents;
        Aabb::new(self.center - ext, self.center + ext)
    }

    /// Closed triangle mesh of the box surface.
    pub fn to_mesh(&self) -> TriMesh {
        box_mesh(Point3::origin(), self.half_extents * 2.0).map_vertices(|p| self.center + self.rotation * p.coords)
    }

    pub fn is_valid(&self) -> bool {
        (self.rotation.quaternion().norm() - 1.0).abs() <= 1e-9
            && self.half_extents.iter().all(|&h| h > 0.0 && h.is_finite())
            && self.center.coords.iter().all(|c| c.is_finite())
    }
}

/// Box aligned with the principal axes of the point covariance.
pub fn pca_obb(points: &[Point3<f64>]) -> Result<Obb> {
    if points.len() < 2 {
        return Err(Error::EmptyInput("pca_obb needs at least two points"));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    if cov.norm() == 0.0 {
        return Err(Error::DegenerateShape("all points coincide".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut axes = eig.eigenvectors;
    // Re-orthonormalize against round-off and force a proper rotation.
    let a0 = axes.column(0).normalize();
    let a1 = (axes.column(1) - a0 * a0.dot(&axes.column(1))).normalize();
    let a2 = a0.cross(&a1);
    axes = Matrix3::from_columns(&[a0, a1, a2]);
    Ok(box_from_axes(points, &axes))
}

/// Tight box around `points` in the frame given by the columns of `axes`.
pub(crate) fn box_from_axes(points: &[Point3<f64>], axes: &Matrix3<f64>) -> Obb {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    let t = axes.transpose();
    for p in points {
        let l = t * p.coords;
        lo = lo.inf(&l);
        hi = hi.sup(&l);
    }
    let center = Point3::from(axes * ((lo + hi) * 0.5));
    let half = ((hi - lo) * 0.5).map(|h| h.max(THIN_HALF_EXTENT));
    Obb::from_axes(center, axes, half)
}

/// Minimum-volume box enclosing every corner of the given boxes.
pub fn enclosing_obb(boxes: &[Obb]) -> Result<Obb> {
    if boxes.is_empty() {
        return Err(Error::EmptyInput("enclosing_obb needs at least one box"));
    }
    let corners: Vec<Point3<f64>> = boxes.iter().flat_map(|b| b.corners()).collect();
    min_obb(&corners)
}

//! Exact intersection volume of two oriented boxes by convex clipping.

use nalgebra::{Point3, Vector3};

use crate::obb::Obb;

/// Convex polytope as a list of planar polygon faces.
struct Polytope {
    faces: Vec<Vec<Point3<f64>>>,
}

impl Polytope {
    fn from_obb(b: &Obb) -> Self {
        let c = b.corners();
        // Corner index bits: x=1, y=2, z=4.
        let quads: [[usize; 4]; 6] = [
            [0, 4, 6, 2],
            [1, 3, 7, 5],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 2, 3, 1],
            [4, 5, 7, 6],
        ];
        Polytope {
            faces: quads.iter().map(|q| q.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    /// Keeps the part with `n·x <= d`, closing the cut with a cap face.
    fn clip(self, n: &Vector3<f64>, d: f64) -> Polytope {
        let scale = self
            .faces
            .iter()
            .flatten()
            .map(|p| p.coords.amax())
            .fold(d.abs(), f64::max);
        let eps = 1e-12 * scale;
        // Distances within rounding of the plane count as on it.
        let side = |p: &Point3<f64>| {
            let s = n.dot(&p.coords) - d;
            if s.abs() <= eps {
                0.0
            } else {
                s
            }
        };
        if self.faces.iter().flatten().all(|p| side(p) <= 0.0) {
            return self;
        }
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cap: Vec<Point3<f64>> = Vec::new();
        for face in self.faces {
            let k = face.len();
            let dist: Vec<f64> = face.iter().map(side).collect();
            if dist.iter().all(|&s| s <= 0.0) {
                cap.extend(face.iter().zip(&dist).filter(|(_, &s)| s == 0.0).map(|(p, _)| *p));
                faces.push(face);
                continue;
            }
            let mut out = Vec::with_capacity(k + 1);
            for i in 0..k {
                let (p, q) = (face[i], face[(i + 1) % k]);
                let (sp, sq) = (dist[i], dist[(i + 1) % k]);
                if sp <= 0.0 {
                    out.push(p);
                    if sp == 0.0 {
                        cap.push(p);
                    }
                }
                if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
                    let x = p + (q - p) * (sp / (sp - sq));
                    out.push(x);
                    cap.push(x);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if let Some(cap) = order_cap(cap, n) {
            faces.push(cap);
        }
        Polytope { faces }
    }

    fn volume(&self) -> f64 {
        let count: usize = self.faces.iter().map(Vec::len).sum();
        if count == 0 {
            return 0.0;
        }
        let c = self.faces.iter().flatten().fold(Vector3::zeros(), |a, p| a + p.coords) / count as f64;
        self.faces
            .iter()
            .map(|f| {
                let mut area = Vector3::zeros();
                for i in 1..f.len() - 1 {
                    area += (f[i] - f[0]).cross(&(f[i + 1] - f[0]));
                }
                area.dot(&(f[0].coords - c)).abs() / 6.0
            })
            .sum()
    }
}

/// Sorts cut points by angle around their centroid in the cutting plane and
/// drops near-duplicates.
fn order_cap(mut pts: Vec<Point3<f64>>, n: &Vector3<f64>) -> Option<Vec<Point3<f64>>> {
    if pts.len() < 3 {
        return None;
    }
    let c = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
    let k = n.iamin();
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u = n.cross(&e).normalize();
    let v = n.cross(&u);
    let angle = |p: &Point3<f64>| {
        let w = p.coords - c;
        w.dot(&v).atan2(w.dot(&u))
    };
    pts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    let scale = pts.iter().map(|p| (p.coords - c).norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(1e-300);
    pts.dedup_by(|a, b| (*a - *b).norm() <= tol);
    if pts.len() >= 3 && (pts[0] - pts[pts.len() - 1]).norm() <= tol {
        pts.pop();
    }
    (pts.len() >= 3).then_some(pts)
}

/// Volume of `a ∩ b`.
pub fn intersection_volume(a: &Obb, b: &Obb) -> f64 {
    let (a, b) = ordered(a, b);
    // Cheap rejection by separating axes of the world AABBs.
    let (ba, bb) = (a.aabb(), b.aabb());
    if !ba.intersects(&bb) {
        return 0.0;
    }
    let axes = a.axes();
    let mut poly = Polytope::from_obb(b);
    for k in 0..3 {
        let n = axes.column(k).into_owned();
        let c = n.dot(&a.center.coords);
        let h = a.half_extents[k];
        poly = poly.clip(&n, c + h);
        if poly.faces.is_empty() {
            return 0.0;
        }
        poly = poly.clip(&-n, -(c - h));
        if poly.faces.is_empty() {
            return 0.0;
        }
    }
    poly.volume().min(a.volume()).min(b.volume())
}

/// Intersection over union of two boxes, exact up to floating point.
/// Symmetric bit-for-bit: the operands are put in a canonical order first.
pub fn obb_iou(a: &Obb, b: &Obb) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn ordered<'a>(a: &'a Obb, b: &'a Obb) -> (&'a Obb, &'a Obb) {
    let key = |o: &Obb| {
        let q = o.rotation.quaternion();
        [
            o.center.x,
            o.center.y,
            o.center.z,
            o.half_extents.x,
            o.half_extents.y,
            o.half_extents.z,
            q.i,
            q.j,
            q.k,
            q.w,
        ]
        .map(f64::to_bits)
    };
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn cube(c: [f64; 3]) -> Obb {
        Obb::axis_aligned(Point3::from(c), Vector3::repeat(0.5))
    }

    #[test]
    fn identical_boxes() {
        let b = Obb::new(
            Point3::new(0.1, 0.2, 0.3),
            Vector3::new(0.3, 0.2, 0.1),
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
        );
        assert!((obb_iou(&b, &b) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_offset_cubes() {
        let iou = obb_iou(&cube([0.0; 3]), &cube([0.5, 0.0, 0.0]));
        assert!((iou - 1.0 / 3.0).abs() < 1e-9, "{iou}");
    }

    #[test]
    fn disjoint_and_touching() {
        assert_eq!(obb_iou(&cube([0.0; 3]), &cube([2.0, 0.0, 0.0])), 0.0);
        assert!(obb_iou(&cube([0.0; 3]), &cube([1.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn nested_box() {
        let big = Obb::axis_aligned(Point3::origin(), Vector3::repeat(1.0));
        let small = cube([0.1, 0.0, -0.1]);
        assert!((obb_iou(&big, &small) - 1.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn cube_rotated_45_about_z() {
        let r = Obb::new(
            Point3::origin(),
            Vector3::repeat(0.5),
            UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_4),
        );
        // Intersection is a regular octagon prism: area 2(√2 - 1) for unit square.
        let inter = 2.0 * (2f64.sqrt() - 1.0);
        let expected = inter / (2.0 - inter);
        assert!((obb_iou(&cube([0.0; 3]), &r) - expected).abs() < 1e-12);
    }
}

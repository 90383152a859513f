//! Minimum-volume enclosing box.
//!
//! The optimal box has two adjacent faces that are each flush with an edge of
//! the convex hull. For every ordered pair of hull edges `(e1, e2)` the first
//! box normal `n1` sweeps the Gauss arc of `e1` (the arc between the normals
//! of its two incident faces), and the second normal is forced to
//! `n2 = ±normalize(n1 × d2)`, which must lie on the Gauss arc of `e2`. That
//! restriction is a single angular interval, found from the sign changes of
//! two sinusoids. The volume is sampled densely over each interval; every
//! sampled local minimum is then refined by golden-section search, cheapest
//! first, unless a lower bound over its bracket already exceeds the best
//! volume found. Extreme vertices come from hill-climbing on the hull
//! graph.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Point2, Point3, Vector2, Vector3};

use super::{box_from_axes, Obb, THIN_HALF_EXTENT};
use crate::error::{Error, Result};
use crate::hull::{classify, convex_hull_2d, ConvexHull, HullEdge, Span};
use crate::mesh::Aabb;

/// Point sets thinner than this fraction of their diagonal are handled as
/// lower-dimensional.
const FLAT_TOL: f64 = 1e-9;
const SAMPLE_STEP: f64 = 0.05;
const GOLDEN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    None,
    Planar,
    Collinear,
    Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObbFit {
    pub obb: Obb,
    pub degeneracy: Degeneracy,
}

/// Minimum-volume oriented box around `points`.
pub fn min_obb(points: &[Point3<f64>]) -> Result<Obb> {
    fit_min_obb(points).map(|f| f.obb)
}

/// As [`min_obb`], also reporting whether the input was flat, collinear or a
/// single point. Degenerate axes get half-extent [`THIN_HALF_EXTENT`].
pub fn fit_min_obb(points: &[Point3<f64>]) -> Result<ObbFit> {
    if points.is_empty() {
        return Err(Error::EmptyInput("min_obb needs at least one point"));
    }
    if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::Invalid("min_obb input contains a non-finite coordinate".into()));
    }
    let diag = Aabb::from_points(points.iter()).map_or(0.0, |b| b.diagonal());
    let span = classify(points, diag * FLAT_TOL).expect("non-empty input");
    let (obb, degeneracy) = match span {
        Span::Point(i) => (
            Obb::axis_aligned(points[i], Vector3::repeat(THIN_HALF_EXTENT)),
            Degeneracy::Point,
        ),
        Span::Line([a, b]) => {
            let d = (points[b] - points[a]).normalize();
            let (u, v) = complement(&d);
            (
                box_from_axes(points, &Matrix3::from_columns(&[d, u, v])),
                Degeneracy::Collinear,
            )
        }
        Span::Plane([a, b, c]) => (planar(points, a, b, c), Degeneracy::Planar),
        Span::Solid(_) => {
            let hull = ConvexHull::build(points, FLAT_TOL * 1e-3)
                .ok_or_else(|| Error::DegenerateShape("convex hull construction failed".into()))?;
            (solid(&hull), Degeneracy::None)
        }
    };
    Ok(ObbFit { obb, degeneracy })
}

/// Orthonormal pair completing `d` to a right-handed frame.
fn complement(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let k = d.iamin();
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u = d.cross(&e).normalize();
    (u, d.cross(&u))
}

fn planar(points: &[Point3<f64>], a: usize, b: usize, c: usize) -> Obb {
    let origin = points[a];
    let ex = (points[b] - origin).normalize();
    let normal = ex.cross(&(points[c] - origin)).normalize();
    let ey = normal.cross(&ex);
    let flat: Vec<Point2<f64>> = points
        .iter()
        .map(|p| {
            let v = p - origin;
            Point2::new(v.dot(&ex), v.dot(&ey))
        })
        .collect();
    let ring = convex_hull_2d(&flat);
    let dir = min_area_direction(&flat, &ring);
    let x = ex * dir.x + ey * dir.y;
    let y = normal.cross(&x);
    box_from_axes(points, &Matrix3::from_columns(&[x, y, normal]))
}

/// Edge direction of the minimum-area enclosing rectangle; one side of that
/// rectangle is always collinear with a hull edge.
fn min_area_direction(pts: &[Point2<f64>], ring: &[usize]) -> Vector2<f64> {
    let mut best = (f64::INFINITY, Vector2::x());
    for k in 0..ring.len() {
        let e = pts[ring[(k + 1) % ring.len()]] - pts[ring[k]];
        if e.norm() == 0.0 {
            continue;
        }
        let d = e.normalize();
        let perp = Vector2::new(-d.y, d.x);
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for &i in ring {
            let q = Vector2::new(pts[i].coords.dot(&d), pts[i].coords.dot(&perp));
            lo = lo.inf(&q);
            hi = hi.sup(&q);
        }
        let area = (hi.x - lo.x) * (hi.y - lo.y);
        if area < best.0 {
            best = (area, d);
        }
    }
    best.1
}

struct Search<'a> {
    verts: &'a [Point3<f64>],
    adj: Vec<Vec<usize>>,
    /// Support-vertex hints for `+n1,-n1,+n2,-n2,+n3,-n3`.
    hints: [usize; 6],
}

impl Search<'_> {
    fn support(&self, dir: &Vector3<f64>, mut at: usize) -> usize {
        let mut best = self.verts[at].coords.dot(dir);
        loop {
            let mut moved = false;
            for &n in &self.adj[at] {
                let d = self.verts[n].coords.dot(dir);
                if d > best {
                    best = d;
                    at = n;
                    moved = true;
                }
            }
            if !moved {
                return at;
            }
        }
    }

    /// Chord between the extreme vertices along `dir`; its projection on
    /// `dir` is the width.
    fn chord(&mut self, dir: &Vector3<f64>, slot: usize) -> Vector3<f64> {
        let hi = self.support(dir, self.hints[2 * slot]);
        let lo = self.support(&-dir, self.hints[2 * slot + 1]);
        self.hints[2 * slot] = hi;
        self.hints[2 * slot + 1] = lo;
        self.verts[hi] - self.verts[lo]
    }

    fn chords(&mut self, axes: &[Vector3<f64>; 3]) -> [Vector3<f64>; 3] {
        [0, 1, 2].map(|k| self.chord(&axes[k], k))
    }

    fn volume(&mut self, axes: &[Vector3<f64>; 3]) -> f64 {
        (0..3).map(|k| self.chord(&axes[k], k).dot(&axes[k])).product()
    }
}

/// Sweep of `n1` over the Gauss arc of one edge paired with a second edge.
#[derive(Clone, Copy)]
struct Pair {
    fa: Vector3<f64>,
    u: Vector3<f64>,
    d2: Vector3<f64>,
    sign: f64,
}

impl Pair {
    fn axes(&self, theta: f64) -> Option<[Vector3<f64>; 3]> {
        self.axes_with_sine(theta).map(|(a, _)| a)
    }

    /// Axes plus `|n1 × d2|`, which bounds how fast `n2` turns.
    fn axes_with_sine(&self, theta: f64) -> Option<([Vector3<f64>; 3], f64)> {
        let n1 = self.fa * theta.cos() + self.u * theta.sin();
        let c = n1.cross(&self.d2);
        let len = c.norm();
        if len < 1e-12 {
            return None;
        }
        let n2 = c * (self.sign / len);
        Some(([n1, n2, n1.cross(&n2)], len))
    }
}

/// A sampled local minimum awaiting refinement.
struct Bracket {
    pair: Pair,
    lo: f64,
    hi: f64,
    value: f64,
    bound: f64,
}

/// Running best box.
struct Best {
    volume: f64,
    axes: Matrix3<f64>,
}

impl Best {
    fn offer(&mut self, volume: f64, axes: &[Vector3<f64>; 3]) {
        if volume < self.volume {
            self.volume = volume;
            self.axes = Matrix3::from_columns(axes);
        }
    }
}

fn solid(hull: &ConvexHull) -> Obb {
    let edges = hull.edges();
    let mut search = Search {
        verts: &hull.vertices,
        adj: hull.adjacency(),
        hints: [0; 6],
    };
    let frame = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut best = Best {
        volume: search.volume(&frame),
        axes: Matrix3::identity(),
    };

    let dirs: Vec<Vector3<f64>> = edges
        .iter()
        .map(|e| (hull.vertices[e.b] - hull.vertices[e.a]).normalize())
        .collect();

    let mut brackets = Vec::new();
    for e1 in &edges {
        let (fa, fb) = (e1.normal_a, e1.normal_b);
        let u_raw = fb - fa * fa.dot(&fb);
        if u_raw.norm() < 1e-15 {
            continue;
        }
        let u = u_raw.normalize();
        let theta_max = fb.dot(&u).atan2(fa.dot(&fb));

        for (e2, d2) in edges.iter().zip(&dirs) {
            for sign in [1.0, -1.0] {
                let pair = Pair { fa, u, d2: *d2, sign };
                let Some((lo, hi)) = feasible_interval(&pair, e2, theta_max) else {
                    continue;
                };
                sample(&mut search, &pair, lo, hi, &mut best, &mut brackets);
            }
        }
    }

    brackets.sort_by(|a, b| a.value.total_cmp(&b.value));
    for b in &brackets {
        if b.bound < best.volume {
            golden(&mut search, &b.pair, b.lo, b.hi, &mut best);
        }
    }
    box_from_axes(&hull.vertices, &best.axes)
}

/// Sub-interval of `[0, theta_max]` on which `n2` lies on the Gauss arc of
/// `e2`. Writing `n2` in the basis of the arc end normals `(ga, gb)`, both
/// coefficients are sinusoids in `theta` and must be non-negative.
fn feasible_interval(pair: &Pair, e2: &HullEdge, theta_max: f64) -> Option<(f64, f64)> {
    let (ga, gb, d2) = (e2.normal_a, e2.normal_b, pair.d2);
    let det = ga.cross(&gb).dot(&d2);
    if det.abs() < 1e-15 {
        return None;
    }
    let a_vec = pair.fa.cross(&d2) * pair.sign;
    let b_vec = pair.u.cross(&d2) * pair.sign;
    let coeff_a = |c: &Vector3<f64>| c.cross(&gb).dot(&d2) / det;
    let coeff_b = |c: &Vector3<f64>| ga.cross(c).dot(&d2) / det;
    let sinusoids = [(coeff_a(&a_vec), coeff_a(&b_vec)), (coeff_b(&a_vec), coeff_b(&b_vec))];

    let mut breaks = vec![0.0, theta_max];
    for &(p, q) in &sinusoids {
        if p == 0.0 && q == 0.0 {
            continue;
        }
        // p cos t + q sin t = 0  =>  t = atan2(p, -q) + k pi
        let base = p.atan2(-q);
        for k in -2..=2 {
            let t = base + k as f64 * std::f64::consts::PI;
            if t > 0.0 && t < theta_max {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let ok = |t: f64| {
        sinusoids.iter().all(|&(p, q)| {
            let tol = 1e-9 * (p.abs() + q.abs());
            p * t.cos() + q * t.sin() >= -tol
        })
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in breaks.windows(2) {
        for t in [w[0], 0.5 * (w[0] + w[1]), w[1]] {
            if ok(t) {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Samples the volume over `[lo, hi]` and records each local minimum with
/// a lower bound of the volume over its bracket.
#[allow(clippy::too_many_arguments)]
fn sample(search: &mut Search, pair: &Pair, lo: f64, hi: f64, best: &mut Best, brackets: &mut Vec<Bracket>) {
    let len = hi - lo;
    if len <= GOLDEN_TOL {
        if let Some(axes) = pair.axes(lo) {
            let v = search.volume(&axes);
            best.offer(v, &axes);
        }
        return;
    }
    let n = ((len / SAMPLE_STEP).ceil() as usize).max(2) + 1;
    let h = len / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    let mut vs = Vec::with_capacity(n);
    let mut bounds = Vec::with_capacity(n);
    for &t in &ts {
        let Some((axes, sine)) = pair.axes_with_sine(t) else {
            vs.push(f64::INFINITY);
            bounds.push(0.0);
            continue;
        };
        let chords = search.chords(&axes);
        let v = (0..3).map(|k| chords[k].dot(&axes[k])).product();
        best.offer(v, &axes);
        vs.push(v);
        // Within `h` of `t`, n1 turns by at most h, n2 by h/(sine - h) and
        // n3 by the sum. A chord keeps a projection of at least
        // `c·cos δ − |c⊥|·sin δ` on an axis turned by δ.
        let bound = if sine > h {
            let d2 = h / (sine - h);
            let turn = [h, d2, h + d2];
            (0..3)
                .map(|k| {
                    if turn[k] >= FRAC_PI_2 {
                        return 0.0;
                    }
                    let along = chords[k].dot(&axes[k]);
                    let across = (chords[k] - axes[k] * along).norm();
                    (along * turn[k].cos() - across * turn[k].sin()).max(0.0)
                })
                .product::<f64>()
                * (1.0 - 1e-9)
        } else {
            0.0
        };
        bounds.push(bound);
    }
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { vs[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { vs[i + 1] };
        if vs[i] > left || vs[i] > right || !vs[i].is_finite() {
            continue;
        }
        brackets.push(Bracket {
            pair: *pair,
            lo: ts[i.saturating_sub(1)],
            hi: ts[(i + 1).min(n - 1)],
            value: vs[i],
            bound: bounds[i],
        });
    }
}

fn golden(search: &mut Search, pair: &Pair, mut a: f64, mut b: f64, best: &mut Best) {
    let mut eval = |theta: f64, best: &mut Best| -> f64 {
        let Some(axes) = pair.axes(theta) else {
            return f64::INFINITY;
        };
        let v = search.volume(&axes);
        best.offer(v, &axes);
        v
    };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = eval(x1, best);
    let mut f2 = eval(x2, best);
    while b - a > GOLDEN_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = eval(x1, best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = eval(x2, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_points(h: Vector3<f64>, q: UnitQuaternion<f64>, c: Point3<f64>) -> Vec<Point3<f64>> {
        Obb::new(c, h, q).corners().to_vec()
    }

    #[test]
    fn axis_aligned_box() {
        let pts = box_points(
            Vector3::new(0.5, 1.0, 1.5),
            UnitQuaternion::identity(),
            Point3::origin(),
        );
        let fit = fit_min_obb(&pts).unwrap();
        assert_eq!(fit.degeneracy, Degeneracy::None);
        assert!((fit.obb.volume() - 6.0).abs() < 1e-9);
        assert!((fit.obb.half_extents - Vector3::new(1.5, 1.0, 0.5)).norm() < 1e-9);
    }

    #[test]
    fn rotated_box_is_recovered() {
        let q = UnitQuaternion::from_euler_angles(0.3, 1.1, -0.7);
        let pts = box_points(Vector3::new(0.5, 1.0, 1.5), q, Point3::new(1.0, -2.0, 0.5));
        let b = min_obb(&pts).unwrap();
        assert!((b.volume() - 6.0).abs() < 1e-9, "{}", b.volume());
        assert!((b.center - Point3::new(1.0, -2.0, 0.5)).norm() < 1e-9);
    }

    #[test]
    fn beats_aabb_on_random_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = UnitQuaternion::from_euler_angles(0.4, 0.2, 0.9);
        let pts: Vec<Point3<f64>> = (0..200)
            .map(|_| {
                let l = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.1..0.1),
                );
                Point3::from(q * l)
            })
            .collect();
        let b = min_obb(&pts).unwrap();
        let aabb = Aabb::from_points(pts.iter()).unwrap().volume();
        assert!(b.volume() < aabb);
        assert!(pts.iter().all(|p| b.contains(p, 1e-9)));
    }

    #[test]
    fn planar_points_get_thin_axis() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(2.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 0.5, 0.0),
        ];
        let fit = fit_min_obb(&pts).unwrap();
        assert_eq!(fit.degeneracy, Degeneracy::Planar);
        assert!((fit.obb.half_extents - Vector3::new(1.0, 0.5, THIN_HALF_EXTENT)).norm() < 1e-12);
    }

    #[test]
    fn rotated_square_in_plane() {
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.6);
        let pts: Vec<Point3<f64>> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|&(x, y)| Point3::from(q * Vector3::new(x, y, 0.0)))
            .collect();
        let b = min_obb(&pts).unwrap();
        assert!((b.half_extents.x - 1.0).abs() < 1e-12 && (b.half_extents.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_and_single_point() {
        let line = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(0.5, 0.5, 0.5),
        ];
        let fit = fit_min_obb(&line).unwrap();
        assert_eq!(fit.degeneracy, Degeneracy::Collinear);
        assert!((fit.obb.half_extents.x - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(fit.obb.half_extents.y, THIN_HALF_EXTENT);

        let fit = fit_min_obb(&[Point3::new(1.0, 2.0, 3.0); 4]).unwrap();
        assert_eq!(fit.degeneracy, Degeneracy::Point);
        assert_eq!(fit.obb.center, Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(min_obb(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn tetrahedron_no_larger_than_rotation_grid() {
        let pts = crate::mesh::primitives::regular_tetrahedron(1.0).vertices;
        let b = min_obb(&pts).unwrap();
        let mut best = f64::INFINITY;
        let steps = 24;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let f = |n: usize| n as f64 * std::f64::consts::PI / steps as f64;
                    let q = UnitQuaternion::from_euler_angles(f(i), f(j), f(k));
                    let rot: Vec<Point3<f64>> = pts.iter().map(|p| q * p).collect();
                    best = best.min(Aabb::from_points(rot.iter()).unwrap().volume());
                }
            }
        }
        assert!(b.volume() <= best * (1.0 + 1e-9), "{} > {}", b.volume(), best);
    }
}

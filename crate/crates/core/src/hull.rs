//! Convex hulls in 2D and 3D, and dimensionality classification of point sets.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Point2, Point3, Vector3};

/// Affine dimension of a point set, with the indices spanning it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Span {
    Point(usize),
    Line([usize; 2]),
    Plane([usize; 3]),
    Solid([usize; 4]),
}

/// Finds an initial simplex greedily: extreme point, farthest point, farthest
/// from the line, farthest from the plane. Distances at or below
/// `tol` count as zero.
pub fn classify(points: &[Point3<f64>], tol: f64) -> Option<Span> {
    points.first()?;
    let i0 = (0..points.len())
        .min_by(|&a, &b| {
            points[a]
                .x
                .total_cmp(&points[b].x)
                .then(points[a].y.total_cmp(&points[b].y))
                .then(points[a].z.total_cmp(&points[b].z))
        })
        .unwrap_or(0);
    let p0 = points[i0];
    let argmax = |f: &dyn Fn(&Point3<f64>) -> f64| -> (usize, f64) {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, f(p)))
            .fold(
                (0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    };

    let (i1, d1) = argmax(&|p| (p - p0).norm());
    if d1 <= tol {
        return Some(Span::Point(i0));
    }
    let dir = (points[i1] - p0) / d1;
    let (i2, d2) = argmax(&|p| {
        let v = p - p0;
        (v - dir * v.dot(&dir)).norm()
    });
    if d2 <= tol {
        return Some(Span::Line([i0, i1]));
    }
    let normal = (points[i1] - p0).cross(&(points[i2] - p0)).normalize();
    let (i3, d3) = argmax(&|p| (p - p0).dot(&normal).abs());
    if d3 <= tol {
        return Some(Span::Plane([i0, i1, i2]));
    }
    Some(Span::Solid([i0, i1, i2, i3]))
}

/// Closed convex polytope with triangulated, outward-facing faces.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    /// Hull vertices only.
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// Unit outward normals, index-aligned with `faces`.
    pub normals: Vec<Vector3<f64>>,
}

/// Hull edge with the normals of its two incident faces.
#[derive(Clone, Copy, Debug)]
pub struct HullEdge {
    pub a: usize,
    pub b: usize,
    pub normal_a: Vector3<f64>,
    pub normal_b: Vector3<f64>,
}

impl ConvexHull {
    /// Incremental construction. Returns `None` when the points do not span
    /// three dimensions at the given relative tolerance.
    pub fn build(points: &[Point3<f64>], relative_tol: f64) -> Option<ConvexHull> {
        let scale = crate::mesh::Aabb::from_points(points.iter())?.diagonal();
        let tol = scale * relative_tol;
        let Span::Solid(simplex) = classify(points, tol)? else {
            return None;
        };
        let mut builder = Builder::new(points, simplex, tol);
        for i in 0..points.len() {
            if !simplex.contains(&i) {
                builder.add(i);
            }
        }
        Some(builder.finish())
    }

    /// Undirected edges between faces that are not coplanar.
    pub fn edges(&self) -> Vec<HullEdge> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.faces.len() * 3);
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                owner.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        let mut out = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a > b {
                    continue;
                }
                let Some(&fj) = owner.get(&(b, a)) else {
                    continue;
                };
                let (na, nb) = (self.normals[fi], self.normals[fj]);
                if na.dot(&nb) > 1.0 - 1e-12 {
                    continue;
                }
                out.push(HullEdge {
                    a,
                    b,
                    normal_a: na,
                    normal_b: nb,
                });
            }
        }
        out
    }

    /// Vertex adjacency lists, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn volume(&self) -> f64 {
        let c = self.vertices[0];
        self.faces
            .iter()
            .map(|f| (self.vertices[f[0]] - c).dot(&(self.vertices[f[1]] - c).cross(&(self.vertices[f[2]] - c))))
            .sum::<f64>()
            / 6.0
    }
}

struct Builder<'a> {
    points: &'a [Point3<f64>],
    faces: Vec<[usize; 3]>,
    normals: Vec<Vector3<f64>>,
    offsets: Vec<f64>,
    alive: Vec<bool>,
    edge_face: HashMap<(usize, usize), usize>,
    tol: f64,
}

impl<'a> Builder<'a> {
    fn new(points: &'a [Point3<f64>], s: [usize; 4], tol: f64) -> Self {
        let mut b = Builder {
            points,
            faces: Vec::new(),
            normals: Vec::new(),
            offsets: Vec::new(),
            alive: Vec::new(),
            edge_face: HashMap::new(),
            tol,
        };
        let centroid =
            Point3::from((points[s[0]].coords + points[s[1]].coords + points[s[2]].coords + points[s[3]].coords) / 4.0);
        for (x, y, z) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            let mut f = [s[x], s[y], s[z]];
            let n = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
            if n.dot(&(centroid - points[f[0]])) > 0.0 {
                f.swap(1, 2);
            }
            b.push_face(f);
        }
        b
    }

    fn push_face(&mut self, f: [usize; 3]) {
        let p = self.points;
        let raw = (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]]));
        let n = raw.try_normalize(0.0).unwrap_or_else(Vector3::zeros);
        let id = self.faces.len();
        self.faces.push(f);
        self.normals.push(n);
        self.offsets.push(n.dot(&p[f[0]].coords));
        self.alive.push(true);
        for k in 0..3 {
            self.edge_face.insert((f[k], f[(k + 1) % 3]), id);
        }
    }

    fn distance(&self, face: usize, i: usize) -> f64 {
        self.normals[face].dot(&self.points[i].coords) - self.offsets[face]
    }

    fn add(&mut self, i: usize) {
        let seed = (0..self.faces.len())
            .filter(|&f| self.alive[f])
            .map(|f| (f, self.distance(f, i)))
            .filter(|&(_, d)| d > self.tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((seed, _)) = seed else {
            return;
        };

        // Grow the visible region from the most visible face so it stays
        // connected even when near-coplanar faces are ambiguous.
        let mut visible = vec![seed];
        let mut in_visible: HashMap<usize, ()> = HashMap::from([(seed, ())]);
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            let face = self.faces[f];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                if let Some(&g) = self.edge_face.get(&(b, a)) {
                    if self.alive[g] && !in_visible.contains_key(&g) && self.distance(g, i) > self.tol {
                        in_visible.insert(g, ());
                        visible.push(g);
                        queue.push_back(g);
                    }
                }
            }
        }

        let mut horizon = Vec::new();
        for &f in &visible {
            let face = self.faces[f];
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                let twin = self.edge_face.get(&(b, a)).copied();
                if twin.map_or(true, |g| !in_visible.contains_key(&g)) {
                    horizon.push((a, b));
                }
            }
        }
        for &f in &visible {
            self.alive[f] = false;
            let face = self.faces[f];
            for k in 0..3 {
                let key = (face[k], face[(k + 1) % 3]);
                if self.edge_face.get(&key) == Some(&f) {
                    self.edge_face.remove(&key);
                }
            }
        }
        for (a, b) in horizon {
            self.push_face([a, b, i]);
        }
    }

    fn finish(self) -> ConvexHull {
        let mut remap = HashMap::new();
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut normals = Vec::new();
        for (f, face) in self.faces.iter().enumerate() {
            if !self.alive[f] {
                continue;
            }
            let mapped = face.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    vertices.push(self.points[v]);
                    vertices.len() - 1
                })
            });
            faces.push(mapped);
            normals.push(self.normals[f]);
        }
        ConvexHull {
            vertices,
            faces,
            normals,
        }
    }
}

/// Counter-clockwise convex hull of 2D points by monotone chain, without
/// collinear points. Returns indices into `points`.
pub fn convex_hull_2d(points: &[Point2<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (points[o], points[a], points[b]);
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0 {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

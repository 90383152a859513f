//! Indexed triangle meshes and the basic operations the dataset pipeline
//! builds on: welding, connected components, volume, normalization and
//! surface sampling.

mod gltf_io;
mod obj;
pub mod primitives;
mod sample;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

pub use obj::{parse_obj, write_obj, write_obj_file};
pub use sample::{sample_surface, SurfaceSamples};

/// Input formats accepted by [`load_mesh`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Gltf,
    Glb,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "gltf" => Some(MeshFormat::Gltf),
            "glb" => Some(MeshFormat::Glb),
            _ => None,
        }
    }
}

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub name: Option<String>,
}

impl TriMesh {
    /// Builds a mesh, checking index bounds and coordinate finiteness.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            faces,
            name: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self
            .vertices
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Invalid(format!("vertex {v} is not finite")));
        }
        let n = self.vertices.len();
        if let Some(f) = self.faces.iter().position(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::Invalid(format!(
                "face {f} references a vertex out of range ({n} vertices)"
            )));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// AABB of the vertices referenced by at least one face.
    pub fn face_aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.faces.iter().flatten().map(|&i| &self.vertices[i]))
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Non-normalized face normal; its length is twice the triangle area.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| 0.5 * self.face_cross(f).norm()).sum()
    }

    /// Applies `f` to every vertex, keeping faces as they are.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            name: self.name.clone(),
        }
    }

    /// Concatenates meshes, offsetting indices. The name of the first mesh is
    /// kept.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> TriMesh {
        let mut out = TriMesh::default();
        for (k, m) in meshes.into_iter().enumerate() {
            if k == 0 {
                out.name = m.name.clone();
            }
            let off = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        }
        out
    }

    /// Extracts the given faces into a new mesh holding only the vertices
    /// they reference, in ascending original index order.
    pub fn submesh(&self, faces: &[usize]) -> TriMesh {
        let mut used = vec![false; self.vertices.len()];
        for &f in faces {
            for &v in &self.faces[f] {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                remap[i] = vertices.len();
                vertices.push(self.vertices[i]);
            }
        }
        let faces = faces
            .iter()
            .map(|&f| {
                let [a, b, c] = self.faces[f];
                [remap[a], remap[b], remap[c]]
            })
            .collect();
        TriMesh {
            vertices,
            faces,
            name: self.name.clone(),
        }
    }

    /// True when every undirected edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        debug_assert!((0..3).all(|k| min[k] <= max[k]));
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in it {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Some(bb)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflate(&self, by: f64) -> Aabb {
        let d = Vector3::repeat(by);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    /// Closed-interval overlap test: touching boxes intersect.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}

/// Uniform scale about a translated origin: `x' = scale * (x + translation)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords + self.translation) * self.scale)
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        mesh.map_vertices(|p| self.apply(p))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &NormalizationTransform) -> NormalizationTransform {
        NormalizationTransform {
            translation: first.translation + self.translation / first.scale,
            scale: self.scale * first.scale,
        }
    }
}

/// Merges vertices closer than `epsilon` (transitively) and drops faces that
/// collapse. With `epsilon == 0` only bit-identical positions merge. Each
/// cluster keeps the position of its lowest-index vertex; cluster order
/// follows that index.
pub fn weld_vertices(mesh: &TriMesh, epsilon: f64) -> TriMesh {
    let n = mesh.vertices.len();
    let mut uf = UnionFind::new(n);
    let key = |x: f64| if x == 0.0 { 0u64 } else { x.to_bits() };
    if epsilon <= 0.0 {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::with_capacity(n);
        for (i, p) in mesh.vertices.iter().enumerate() {
            let k = [key(p.x), key(p.y), key(p.z)];
            match seen.get(&k) {
                Some(&j) => {
                    uf.union(j, i);
                }
                None => {
                    seen.insert(k, i);
                }
            }
        }
    } else {
        let cell = |p: &Point3<f64>| {
            [
                (p.x / epsilon).floor() as i64,
                (p.y / epsilon).floor() as i64,
                (p.z / epsilon).floor() as i64,
            ]
        };
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::with_capacity(n);
        for (i, p) in mesh.vertices.iter().enumerate() {
            grid.entry(cell(p)).or_default().push(i);
        }
        let eps2 = epsilon * epsilon;
        for (i, p) in mesh.vertices.iter().enumerate() {
            let c = cell(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &j in bucket {
                            if j > i && (mesh.vertices[j] - p).norm_squared() <= eps2 {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut remap = vec![0usize; n];
    let mut vertices = Vec::new();
    for group in uf.groups() {
        for &v in &group {
            remap[v] = vertices.len();
        }
        vertices.push(mesh.vertices[group[0]]);
    }
    let faces = mesh
        .faces
        .iter()
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    TriMesh {
        vertices,
        faces,
        name: mesh.name.clone(),
    }
}

/// Weld tolerance relative to the AABB diagonal of the mesh.
pub fn weld_relative(mesh: &TriMesh, relative: f64) -> TriMesh {
    let eps = mesh.aabb().map_or(0.0, |b| b.diagonal() * relative);
    weld_vertices(mesh, eps)
}

/// Partitions face indices by shared-vertex connectivity. Groups are ordered
/// by descending face count, ties broken by their first face index.
pub fn component_face_sets(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(mesh.vertices.len());
    for f in &mesh.faces {
        uf.union(f[0], f[1]);
        uf.union(f[1], f[2]);
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for (i, f) in mesh.faces.iter().enumerate() {
        let root = uf.find(f[0]);
        let s = *slot.entry(root).or_insert_with(|| {
            sets.push(Vec::new());
            sets.len() - 1
        });
        sets[s].push(i);
    }
    // Stable sort keeps first-face order among equal sizes.
    sets.sort_by_key(|s| std::cmp::Reverse(s.len()));
    sets
}

/// Splits a (welded) mesh into its vertex-connected components.
pub fn connected_components(mesh: &TriMesh) -> Vec<TriMesh> {
    component_face_sets(mesh)
        .iter()
        .map(|faces| mesh.submesh(faces))
        .collect()
}

/// Absolute signed-tetrahedron volume, taken about the AABB center so the
/// result does not depend on placement. Exact for closed, consistently
/// oriented meshes; a heuristic magnitude for open ones.
pub fn mesh_volume(mesh: &TriMesh) -> f64 {
    let Some(bb) = mesh.aabb() else {
        return 0.0;
    };
    let c = bb.center();
    let sum: f64 = mesh
        .faces
        .iter()
        .map(|f| {
            let a = mesh.vertices[f[0]] - c;
            let b = mesh.vertices[f[1]] - c;
            let d = mesh.vertices[f[2]] - c;
            a.dot(&b.cross(&d))
        })
        .sum();
    (sum / 6.0).abs()
}

/// Centers the joint AABB of all segments at the origin and scales its
/// longest side to exactly 1.
pub fn normalize_shape(segments: &[TriMesh]) -> Result<(Vec<TriMesh>, NormalizationTransform)> {
    let bb = segments
        .iter()
        .filter_map(TriMesh::aabb)
        .reduce(|a, b| a.union(&b))
        .ok_or(Error::EmptyInput("normalize_shape needs at least one vertex"))?;
    let longest = bb.extent().max();
    if !(longest > 0.0) {
        return Err(Error::DegenerateShape("all vertices coincide; cannot normalize".into()));
    }
    let transform = NormalizationTransform {
        translation: -bb.center().coords,
        scale: 1.0 / longest,
    };
    let out = segments.iter().map(|m| transform.apply_mesh(m)).collect();
    Ok((out, transform))
}

/// Loads a mesh file. glTF scene graphs are flattened: every primitive becomes
/// its own mesh with the accumulated node transform baked into its vertices.
/// OBJ files yield one mesh per object/group.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Vec<TriMesh>> {
    match format {
        MeshFormat::Obj => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_obj(&bytes, path)
        }
        MeshFormat::Gltf | MeshFormat::Glb => gltf_io::load_gltf(path, format),
    }
}

/// [`load_mesh`] with the format taken from the file extension.
pub fn load_mesh_auto(path: &Path) -> Result<Vec<TriMesh>> {
    let format = MeshFormat::from_path(path).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        message: "unrecognized file extension".into(),
    })?;
    load_mesh(path, format)
}

#[cfg(test)]
mod tests {
    use super::primitives::{box_mesh, regular_tetrahedron};
    use super::*;
    use nalgebra::{Rotation3, UnitQuaternion};

    fn two_triangles_split() -> TriMesh {
        // Two triangles sharing edge (1,0,0)-(0,1,0), stored with duplicated vertices.
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn weld_merges_shared_edge() {
        let w = weld_vertices(&two_triangles_split(), 1e-6);
        assert_eq!(w.vertices.len(), 4);
        assert_eq!(w.faces.len(), 2);
        assert_eq!(connected_components(&w).len(), 1);
    }

    #[test]
    fn weld_with_zero_epsilon_merges_exact_duplicates() {
        let w = weld_vertices(&two_triangles_split(), 0.0);
        assert_eq!(w.vertices.len(), 4);
    }

    #[test]
    fn weld_is_identity_without_duplicates() {
        let m = box_mesh(Point3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 0.5));
        assert_eq!(weld_vertices(&m, 0.0), m);
    }

    #[test]
    fn weld_drops_collapsed_faces() {
        let m = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1e-9, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(weld_vertices(&m, 1e-6).faces.is_empty());
    }

    #[test]
    fn components_of_disjoint_triangles() {
        let a = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let b = a.map_vertices(|p| p + Vector3::new(5.0, 0.0, 0.0));
        let comps = connected_components(&TriMesh::concat([&a, &b]));
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].vertices.len(), 3);
        assert_eq!(comps[1].vertices[0].x, 5.0);
    }

    #[test]
    fn closed_cube_is_one_component() {
        let cube = box_mesh(Point3::origin(), Vector3::repeat(1.0));
        assert_eq!(connected_components(&cube).len(), 1);
        assert!(cube.is_closed());
    }

    #[test]
    fn components_order_by_face_count() {
        let small = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cube = box_mesh(Point3::new(3.0, 0.0, 0.0), Vector3::repeat(1.0));
        let comps = connected_components(&TriMesh::concat([&small, &cube]));
        assert_eq!(comps[0].faces.len(), 12);
        assert_eq!(comps[1].faces.len(), 1);
    }

    #[test]
    fn empty_mesh_has_no_components() {
        assert!(connected_components(&TriMesh::default()).is_empty());
    }

    #[test]
    fn unit_cube_volume() {
        let cube = box_mesh(Point3::new(0.3, -2.0, 7.0), Vector3::repeat(1.0));
        assert!((mesh_volume(&cube) - 1.0).abs() < 1e-9);
        let r = UnitQuaternion::from_euler_angles(0.3, -1.1, 2.4);
        let rotated = cube.map_vertices(|p| r * p);
        assert!((mesh_volume(&rotated) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn regular_tetrahedron_volume() {
        let t = regular_tetrahedron(1.0);
        assert!((mesh_volume(&t) - 2f64.sqrt() / 12.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_cube_from_0_to_2() {
        let cube = box_mesh(Point3::new(1.0, 1.0, 1.0), Vector3::repeat(2.0));
        let (out, t) = normalize_shape(&[cube]).unwrap();
        assert_eq!(t.scale, 0.5);
        assert_eq!(t.translation, Vector3::new(-1.0, -1.0, -1.0));
        let bb = out[0].aabb().unwrap();
        assert_eq!(bb.min, Point3::new(-0.5, -0.5, -0.5));
        assert_eq!(bb.max, Point3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn normalize_is_identity_on_normalized_shape() {
        let cube = box_mesh(Point3::origin(), Vector3::new(1.0, 0.4, 0.2));
        let (_, t) = normalize_shape(&[cube]).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-9);
        assert!(t.translation.norm() < 1e-9);
    }

    #[test]
    fn normalize_joint_extent() {
        let a = box_mesh(Point3::new(0.5, 0.5, 1.0), Vector3::new(1.0, 1.0, 2.0));
        let b = box_mesh(Point3::new(3.5, 0.5, 0.5), Vector3::new(1.0, 1.0, 1.0));
        let (out, _) = normalize_shape(&[a, b]).unwrap();
        let bb = out[0].aabb().unwrap().union(&out[1].aabb().unwrap());
        let e = bb.extent();
        assert!((e - Vector3::new(1.0, 0.25, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn normalize_rejects_single_point_shapes() {
        let m = TriMesh::new(vec![Point3::new(1.0, 1.0, 1.0); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(normalize_shape(&[m]), Err(Error::DegenerateShape(_))));
    }

    #[test]
    fn normalization_transform_composition() {
        let a = NormalizationTransform {
            translation: Vector3::new(1.0, -2.0, 0.5),
            scale: 0.25,
        };
        let b = NormalizationTransform {
            translation: Vector3::new(-0.3, 0.1, 0.0),
            scale: 3.0,
        };
        let p = Point3::new(0.7, 0.2, -1.3);
        let composed = b.after(&a).apply(&p);
        assert!((composed - b.apply(&a.apply(&p))).norm() < 1e-12);
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        assert!(TriMesh::new(vec![Point3::origin()], vec![[0, 0, 1]]).is_err());
        assert!(TriMesh::new(vec![Point3::new(f64::NAN, 0.0, 0.0)], vec![]).is_err());
    }

    #[test]
    fn submesh_keeps_only_referenced_vertices() {
        let r = Rotation3::from_euler_angles(0.1, 0.2, 0.3);
        let cube = box_mesh(Point3::origin(), Vector3::repeat(1.0)).map_vertices(|p| r * p);
        let sub = cube.submesh(&[0]);
        assert_eq!(sub.vertices.len(), 3);
        assert_eq!(sub.triangle(0), cube.triangle(0));
    }
}

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use partkit_core::mesh::{component_face_sets, TriMesh};
use partkit_core::Obb;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus_paths(dir: &str) -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("obj" | "glb" | "gltf")))
        .collect();
    paths.sort();
    paths
}

pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let q = nalgebra::Quaternion::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    );
    UnitQuaternion::from_quaternion(q)
}

pub fn random_box(rng: &mut impl Rng) -> Obb {
    let c = Point3::new(
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
    );
    let h = Vector3::new(
        rng.random_range(0.05..0.5),
        rng.random_range(0.05..0.5),
        rng.random_range(0.05..0.5),
    );
    Obb::new(c, h, random_rotation(rng))
}

/// Triangles as vertex-coordinate bit patterns, rotated so the smallest
/// vertex comes first; sorted.
pub fn face_multiset<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> Vec<[[u64; 3]; 3]> {
    let mut out = Vec::new();
    for m in meshes {
        for f in 0..m.faces.len() {
            let t = m.triangle(f).map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]);
            let r = (0..3).min_by_key(|&i| t[i]).unwrap();
            out.push([t[r], t[(r + 1) % 3], t[(r + 2) % 3]]);
        }
    }
    out.sort();
    out
}

pub fn component_count(m: &TriMesh) -> usize {
    component_face_sets(m).len()
}

//! Closed, outward-oriented primitive meshes used by fixtures and tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use super::TriMesh;

/// Axis-aligned box with the given center and full side lengths.
pub fn box_mesh(center: Point3<f64>, size: Vector3<f64>) -> TriMesh {
    let h = size * 0.5;
    let vertices = (0..8)
        .map(|i| {
            let s = |bit: usize| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
            center + Vector3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z)
        })
        .collect();
    // Corner index bits: x = 1, y = 2, z = 4.
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1], // -z
        [4, 5, 7],
        [4, 7, 6], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 6, 7],
        [2, 7, 3], // +y
        [0, 4, 6],
        [0, 6, 2], // -x
        [1, 3, 7],
        [1, 7, 5], // +x
    ];
    TriMesh {
        vertices,
        faces,
        name: None,
    }
}

/// Regular tetrahedron with the given edge length, centered at the origin.
pub fn regular_tetrahedron(edge: f64) -> TriMesh {
    let s = edge / (2.0 * 2f64.sqrt());
    let vertices = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh {
        vertices,
        faces,
        name: None,
    }
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriMesh {
        vertices: verts.iter().map(|v| center + v * radius).collect(),
        faces,
        name: None,
    }
}

/// Capped cylinder along +z.
pub fn cylinder(center: Point3<f64>, radius: f64, height: f64, segments: usize) -> TriMesh {
    let segments = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for ring in [-0.5, 0.5] {
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            vertices.push(center + Vector3::new(radius * a.cos(), radius * a.sin(), ring * height));
        }
    }
    let bottom = vertices.len();
    vertices.push(center + Vector3::new(0.0, 0.0, -0.5 * height));
    let top = vertices.len();
    vertices.push(center + Vector3::new(0.0, 0.0, 0.5 * height));
    let mut faces = Vec::with_capacity(4 * segments);
    for i in 0..segments {
        let j = (i + 1) % segments;
        faces.push([i, j, segments + j]);
        faces.push([i, segments + j, segments + i]);
        faces.push([bottom, j, i]);
        faces.push([top, segments + i, segments + j]);
    }
    TriMesh {
        vertices,
        faces,
        name: None,
    }
}

/// Axis-aligned rectangle in the plane `z = center.z`, facing +z.
pub fn quad(center: Point3<f64>, size_x: f64, size_y: f64) -> TriMesh {
    let (hx, hy) = (size_x * 0.5, size_y * 0.5);
    let vertices = vec![
        center + Vector3::new(-hx, -hy, 0.0),
        center + Vector3::new(hx, -hy, 0.0),
        center + Vector3::new(hx, hy, 0.0),
        center + Vector3::new(-hx, hy, 0.0),
    ];
    TriMesh {
        vertices,
        faces: vec![[0, 1, 2], [0, 2, 3]],
        name: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::mesh_volume;

    #[test]
    fn primitives_are_closed_and_outward() {
        let signed = |m: &TriMesh| -> f64 {
            m.faces
                .iter()
                .map(|f| {
                    let [a, b, c] = [m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]];
                    a.coords.dot(&b.coords.cross(&c.coords))
                })
                .sum::<f64>()
                / 6.0
        };
        let meshes = [
            box_mesh(Point3::origin(), Vector3::new(1.0, 2.0, 3.0)),
            regular_tetrahedron(1.0),
            icosphere(Point3::origin(), 1.0, 2),
            cylinder(Point3::origin(), 0.5, 2.0, 16),
        ];
        for m in &meshes {
            assert!(m.is_closed());
            assert!(signed(m) > 0.0);
        }
        assert!((mesh_volume(&meshes[0]) - 6.0).abs() < 1e-12);
    }
}

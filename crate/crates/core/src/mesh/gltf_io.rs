//! glTF 2.0 loading with scene-graph flattening: the node hierarchy is
//! discarded and each primitive is emitted in world space.

use std::path::Path;

use gltf::mesh::Mode;
use nalgebra::{Matrix4, Point3};

use super::{MeshFormat, TriMesh};
use crate::error::{Error, Result};

const GLB_HEADER: usize = 12;
const CHUNK_HEADER: usize = 8;
const CHUNK_JSON: u32 = 0x4E4F_534A;

pub(super) fn load_gltf(path: &Path, format: MeshFormat) -> Result<Vec<TriMesh>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        message,
    };

    let json_start = match format {
        MeshFormat::Glb => check_glb_container(&bytes).map_err(|(o, m)| fail(o, m))?,
        _ => 0,
    };
    let gltf = gltf::Gltf::from_slice(&bytes).map_err(|e| match e {
        gltf::Error::Deserialize(ref je) => {
            let json = &bytes[json_start..];
            fail(
                json_start + line_col_to_offset(json, je.line(), je.column()),
                je.to_string(),
            )
        }
        other => fail(json_start, other.to_string()),
    })?;
    let gltf::Gltf { document, blob } = gltf;
    let buffers = gltf::import_buffers(&document, path.parent(), blob)
        .map_err(|e| fail(json_start, format!("buffer load failed: {e}")))?;

    let roots: Vec<gltf::Node> = match document.default_scene().or_else(|| document.scenes().next()) {
        Some(scene) => scene.nodes().collect(),
        None => {
            let mut is_child = vec![false; document.nodes().len()];
            for n in document.nodes() {
                for c in n.children() {
                    is_child[c.index()] = true;
                }
            }
            document.nodes().filter(|n| !is_child[n.index()]).collect()
        }
    };

    let mut out = Vec::new();
    let mut stack: Vec<(gltf::Node, Matrix4<f64>)> =
        roots.into_iter().rev().map(|n| (n, Matrix4::identity())).collect();
    while let Some((node, parent)) = stack.pop() {
        let local = Matrix4::from_fn(|r, c| node.transform().matrix()[c][r] as f64);
        let world = parent * local;
        if let Some(mesh) = node.mesh() {
            let node_name = node
                .name()
                .map(str::to_owned)
                .unwrap_or_else(|| format!("node{}", node.index()));
            for prim in mesh.primitives() {
                out.push(read_primitive(&prim, &buffers, &world, &node_name, path)?);
            }
        }
        let children: Vec<_> = node.children().collect();
        for child in children.into_iter().rev() {
            stack.push((child, world));
        }
    }
    Ok(out)
}

fn read_primitive(
    prim: &gltf::Primitive,
    buffers: &[gltf::buffer::Data],
    world: &Matrix4<f64>,
    node_name: &str,
    path: &Path,
) -> Result<TriMesh> {
    let reader = prim.reader(|b| buffers.get(b.index()).map(|d| &d.0[..]));
    let positions: Vec<Point3<f64>> = reader
        .read_positions()
        .ok_or_else(|| Error::UnsupportedGeometry {
            node: node_name.to_owned(),
            message: "primitive has no POSITION attribute".into(),
        })?
        .map(|p| world.transform_point(&Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)))
        .collect();
    let indices: Vec<usize> = match reader.read_indices() {
        Some(ix) => ix.into_u32().map(|i| i as usize).collect(),
        None => (0..positions.len()).collect(),
    };
    let mut faces: Vec<[usize; 3]> = match prim.mode() {
        Mode::Triangles => indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        Mode::TriangleStrip => (2..indices.len())
            .map(|k| {
                if k % 2 == 0 {
                    [indices[k - 2], indices[k - 1], indices[k]]
                } else {
                    [indices[k - 1], indices[k - 2], indices[k]]
                }
            })
            .collect(),
        Mode::TriangleFan => (2..indices.len())
            .map(|k| [indices[0], indices[k - 1], indices[k]])
            .collect(),
        other => {
            return Err(Error::UnsupportedGeometry {
                node: node_name.to_owned(),
                message: format!("primitive mode {other:?} is not triangles"),
            })
        }
    };
    // Mirroring transforms would turn outward faces inward.
    let det = world.fixed_view::<3, 3>(0, 0).determinant();
    if det < 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    let mesh = TriMesh {
        vertices: positions,
        faces,
        name: Some(node_name.to_owned()),
    };
    mesh.validate().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        message: format!("node `{node_name}`: {e}"),
    })?;
    Ok(mesh)
}

/// Validates the GLB container framing; returns the offset of the JSON chunk
/// payload.
fn check_glb_container(bytes: &[u8]) -> Result<usize, (usize, String)> {
    let u32_at = |o: usize| -> Option<u32> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    if bytes.get(0..4) != Some(b"glTF") {
        return Err((0, "missing glTF magic".into()));
    }
    match u32_at(4) {
        Some(2) => {}
        Some(v) => return Err((4, format!("unsupported container version {v}"))),
        None => return Err((4, "truncated header".into())),
    }
    let total = u32_at(8).ok_or((8, "truncated header".to_string()))? as usize;
    if total != bytes.len() {
        return Err((8, format!("declared length {total} but file has {} bytes", bytes.len())));
    }
    let chunk_len = u32_at(GLB_HEADER).ok_or((GLB_HEADER, "missing JSON chunk".to_string()))? as usize;
    if u32_at(GLB_HEADER + 4) != Some(CHUNK_JSON) {
        return Err((GLB_HEADER + 4, "first chunk is not JSON".into()));
    }
    let start = GLB_HEADER + CHUNK_HEADER;
    if start + chunk_len > bytes.len() {
        return Err((GLB_HEADER, "JSON chunk overruns file".into()));
    }
    Ok(start)
}

fn line_col_to_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut line_start = 0;
    for (i, &b) in text.iter().enumerate() {
        if current == line {
            break;
        }
        if b == b'\n' {
            current += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_column_maps_to_byte_offset() {
        let text = b"{\n  \"a\": x\n}";
        assert_eq!(line_col_to_offset(text, 2, 8), 9);
        assert_eq!(text[9], b'x');
    }

    #[test]
    fn bad_glb_magic_is_reported_at_zero() {
        assert_eq!(check_glb_container(b"nope").unwrap_err().0, 0);
    }
}

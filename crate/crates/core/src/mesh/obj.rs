//! Wavefront OBJ reading (positions and faces only) and writing.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{Error, Result};

struct Group {
    name: Option<String>,
    faces: Vec<[usize; 3]>,
}

/// Parses OBJ text. Every `o`/`g` statement opens a new mesh; empty groups are
/// dropped. Polygons are fan-triangulated and each mesh keeps only the
/// vertices it references.
pub fn parse_obj(bytes: &[u8], path: &Path) -> Result<Vec<TriMesh>> {
    let fail = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| fail(e.valid_up_to(), "file is not valid UTF-8".into()))?;

    let mut positions: Vec<Point3<f64>> = Vec::new();
    let mut groups = vec![Group {
        name: None,
        faces: Vec::new(),
    }];
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let line_start = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else {
            continue;
        };
        match tag {
            "v" => {
                let mut xyz = [0.0f64; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| fail(line_start, "vertex needs three coordinates".into()))?;
                    *c = tok
                        .parse()
                        .map_err(|_| fail(line_start, format!("invalid coordinate `{tok}`")))?;
                    if !c.is_finite() {
                        return Err(fail(line_start, format!("non-finite coordinate `{tok}`")));
                    }
                }
                positions.push(Point3::from(xyz));
            }
            "f" => {
                let mut idx = Vec::with_capacity(4);
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| fail(line_start, format!("invalid face index `{tok}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        positions.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(fail(line_start, format!("face index `{tok}` out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(fail(line_start, "face needs at least three vertices".into()));
                }
                let group = groups.last_mut().expect("at least one group");
                for k in 1..idx.len() - 1 {
                    group.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            "o" | "g" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                groups.push(Group {
                    name: (!name.is_empty()).then_some(name),
                    faces: Vec::new(),
                });
            }
            _ => {}
        }
    }

    Ok(groups
        .into_iter()
        .filter(|g| !g.faces.is_empty())
        .map(|g| {
            let mut remap = vec![usize::MAX; positions.len()];
            let mut vertices = Vec::new();
            let mut used: Vec<usize> = g.faces.iter().flatten().copied().collect();
            used.sort_unstable();
            used.dedup();
            for v in used {
                remap[v] = vertices.len();
                vertices.push(positions[v]);
            }
            let faces = g
                .faces
                .iter()
                .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
                .collect();
            TriMesh {
                vertices,
                faces,
                name: g.name,
            }
        })
        .collect())
}

/// Writes one mesh as an OBJ object. Coordinates use the shortest
/// round-trip representation, so output is lossless and deterministic.
pub fn write_obj(mesh: &TriMesh, out: &mut impl Write) -> std::io::Result<()> {
    if let Some(name) = &mesh.name {
        writeln!(out, "o {name}")?;
    }
    for p in &mesh.vertices {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_obj_file(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_obj(mesh, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

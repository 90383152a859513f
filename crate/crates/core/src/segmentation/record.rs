use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ShapeStats;
use crate::mesh::{load_mesh, write_obj_file, MeshFormat, TriMesh};
use crate::metrics::Layout;
use crate::obb::Obb;
use crate::{Error, Result};

pub const RECORD_FILE: &str = "record.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    pub config_hash: String,
}

/// One processed shape: parts with their boxes, prompt and statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeRecord {
    pub parts: Vec<TriMesh>,
    pub obbs: Vec<Obb>,
    pub prompt: Option<String>,
    pub stats: ShapeStats,
    pub provenance: Provenance,
}

/// On-disk form; `parts` are OBJ paths relative to the record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    pub parts: Vec<String>,
    pub obbs: Vec<Obb>,
    pub prompt: Option<String>,
    pub stats: ShapeStats,
    pub provenance: Provenance,
}

pub fn part_file_name(i: usize) -> String {
    format!("part_{i:03}.obj")
}

impl ShapeRecord {
    pub fn to_file(&self) -> RecordFile {
        RecordFile {
            parts: (0..self.parts.len()).map(part_file_name).collect(),
            obbs: self.obbs.clone(),
            prompt: self.prompt.clone(),
            stats: self.stats.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("record serializes") + "\n"
    }

    /// Writes `record.json` and one OBJ per part into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, part) in self.parts.iter().enumerate() {
            let named = TriMesh {
                name: Some(format!("part_{i:03}")),
                ..part.clone()
            };
            write_obj_file(&named, &dir.join(part_file_name(i)))?;
        }
        let path = dir.join(RECORD_FILE);
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads a record file and the part meshes it references.
    pub fn read(path: &Path) -> Result<ShapeRecord> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RecordFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: e.to_string(),
        })?;
        Self::from_file(file, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_file(file: RecordFile, base: &Path) -> Result<ShapeRecord> {
        if file.parts.len() != file.obbs.len() {
            return Err(Error::Alignment {
                parts: file.parts.len(),
                boxes: file.obbs.len(),
            });
        }
        let parts = file
            .parts
            .iter()
            .map(|rel| {
                let p = base.join(rel);
                let meshes = load_mesh(&p, MeshFormat::Obj)?;
                let mut merged = TriMesh::concat(meshes.iter());
                merged.name = meshes.first().and_then(|m| m.name.clone());
                Ok(merged)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShapeRecord {
            parts,
            obbs: file.obbs,
            prompt: file.prompt,
            stats: file.stats,
            provenance: file.provenance,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            prompt: self.prompt.clone().unwrap_or_default(),
            boxes: self.obbs.clone(),
        }
    }
}

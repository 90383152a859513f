use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use partkit_core::mesh::{write_obj_file, TriMesh};
use partkit_core::metrics::Layout;
use partkit_core::segmentation::{part_file_name, RecordFile};
use partkit_core::{PipelineConfig, ShapeRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Parses a JSON document, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::schema(format!("{}: at `{}`: {}", origin.display(), e.path(), e.inner())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text, path)
}

/// Loads a TOML or JSON config (by extension), or the defaults.
pub fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: PipelineConfig = if path.extension().is_some_and(|e| e == "toml") {
        let de = toml::Deserializer::parse(&text).map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::schema(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?
    } else {
        parse_json(&text, path)?
    };
    config
        .validate()
        .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Accepts either a record directory or its `record.json`.
pub fn record_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(partkit_core::segmentation::RECORD_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn read_record(path: &Path) -> CliResult<ShapeRecord> {
    let path = record_path(path);
    let file: RecordFile = read_json(&path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let record = ShapeRecord::from_file(file, base).with_context(|| format!("loading parts of {}", path.display()))?;
    Ok(record)
}

/// The layout given on the command line, or the record's own boxes.
pub fn read_layout(path: Option<&Path>, record: &ShapeRecord) -> CliResult<Layout> {
    let layout = match path {
        Some(p) => read_json::<Layout>(p)?,
        None => record.layout(),
    };
    layout
        .validate()
        .map_err(|e| CliError::schema(format!("layout: {e}")))?;
    Ok(layout)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes JSON to `out` or stdout.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = to_json(value);
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes `part_XXX.obj` files into `dir`.
pub fn write_parts(dir: &Path, parts: &[TriMesh]) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, part) in parts.iter().enumerate() {
        let named = TriMesh {
            name: Some(format!("part_{i:03}")),
            ..part.clone()
        };
        write_obj_file(&named, &dir.join(part_file_name(i)))?;
    }
    Ok(())
}

use std::path::{Path, PathBuf};

use anyhow::Context;
use partkit_core::metrics::dataset_stats;
use partkit_core::segmentation::RECORD_FILE;

use crate::error::{CliError, CliResult};
use crate::io::{emit_json, read_record};

pub fn run(inputs: &[PathBuf], bins: usize, out: Option<&Path>) -> CliResult<()> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            find_records(input, &mut files)?;
        } else {
            files.push(input.clone());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::schema("no record files found"));
    }
    let records = files.iter().map(|f| read_record(f)).collect::<CliResult<Vec<_>>>()?;
    let report = dataset_stats(&records, bins).map_err(|e| CliError::schema(e.to_string()))?;
    emit_json(&report, out)
}

fn find_records(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry.context("reading directory entry")?.path();
        if path.is_dir() {
            find_records(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use partkit_core::segmentation::{run_pipeline, PipelineOutput, RejectReason, RECORD_FILE};
use partkit_core::PipelineConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliResult;
use crate::io::{to_json, write_file};

pub const REJECTIONS_FILE: &str = "rejections.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RECORDS_DIR: &str = "records";

const MESH_EXTENSIONS: [&str; 3] = ["obj", "glb", "gltf"];

#[derive(Serialize)]
struct Rejection<'a> {
    source: String,
    part_count: usize,
    mean_part_iou: f64,
    largest_rest_ratio: Option<f64>,
    reasons: &'a [RejectReason],
}

#[derive(Serialize)]
struct Failure {
    source: String,
    error: String,
}

#[derive(Serialize)]
struct Accepted {
    source: String,
    record: String,
}

#[derive(Serialize)]
struct Summary {
    config_hash: String,
    inputs: usize,
    accepted: Vec<Accepted>,
    rejected: usize,
    errors: usize,
}

/// Returns the number of inputs that failed with an error.
pub fn run(inputs: &[PathBuf], config: &PipelineConfig, out: &Path) -> CliResult<usize> {
    let files = collect_inputs(inputs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .context("building worker pool")?;
    let results: Vec<partkit_core::Result<PipelineOutput>> =
        pool.install(|| files.par_iter().map(|f| run_pipeline(f, config)).collect());

    let mut used = BTreeSet::new();
    let (mut rejections, mut errors) = (String::new(), String::new());
    let mut summary = Summary {
        config_hash: config.hash(),
        inputs: files.len(),
        accepted: Vec::new(),
        rejected: 0,
        errors: 0,
    };
    for (file, result) in files.iter().zip(results) {
        let source = file.to_string_lossy().into_owned();
        match result {
            Ok(output) if output.decision.is_accept() => {
                let name = unique_name(file, &mut used);
                let dir = out.join(RECORDS_DIR).join(&name);
                output
                    .record
                    .write(&dir)
                    .with_context(|| format!("writing record for {source}"))?;
                summary.accepted.push(Accepted {
                    source,
                    record: format!("{RECORDS_DIR}/{name}/{RECORD_FILE}"),
                });
            }
            Ok(output) => {
                let s = &output.record.stats;
                let line = Rejection {
                    source,
                    part_count: s.part_count,
                    mean_part_iou: s.mean_part_iou,
                    largest_rest_ratio: s.largest_rest_ratio,
                    reasons: output.decision.reasons(),
                };
                rejections.push_str(&serde_json::to_string(&line)?);
                rejections.push('\n');
                summary.rejected += 1;
            }
            Err(e) => {
                eprintln!("{source}: {e}");
                let line = Failure {
                    source,
                    error: e.to_string(),
                };
                errors.push_str(&serde_json::to_string(&line)?);
                errors.push('\n');
                summary.errors += 1;
            }
        }
    }
    write_file(&out.join(REJECTIONS_FILE), rejections)?;
    write_file(&out.join(ERRORS_FILE), errors)?;
    write_file(&out.join(SUMMARY_FILE), to_json(&summary))?;
    eprintln!(
        "{} inputs: {} accepted, {} rejected, {} errors",
        summary.inputs,
        summary.accepted.len(),
        summary.rejected,
        summary.errors
    );
    Ok(summary.errors)
}

/// Files are taken as given; directories contribute their mesh files, sorted.
fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && p.extension()
                            .and_then(|e| e.to_str())
                            .is_some_and(|e| MESH_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

/// Record directory name from the file stem, restricted to a safe alphabet
/// and made unique.
fn unique_name(file: &Path, used: &mut BTreeSet<String>) -> String {
    let stem = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut base: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if base.is_empty() {
        base = "shape".into();
    }
    let mut name = base.clone();
    let mut k = 2;
    while !used.insert(name.clone()) {
        name = format!("{base}_{k}");
        k += 1;
    }
    name
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_safe_and_unique() {
        let mut used = BTreeSet::new();
        assert_eq!(unique_name(Path::new("a/chair.obj"), &mut used), "chair");
        assert_eq!(unique_name(Path::new("b/chair.glb"), &mut used), "chair_2");
        assert_eq!(unique_name(Path::new("../..obj"), &mut used), "_");
        assert_eq!(unique_name(Path::new("x/ü b.obj"), &mut used), "__b");
    }
}

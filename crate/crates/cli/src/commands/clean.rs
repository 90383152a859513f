use std::path::Path;

use partkit_core::refine::{filter_artifacts, ArtifactReport};
use partkit_core::PipelineConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_layout, read_record, to_json, write_file, write_parts};

#[derive(Serialize)]
struct Report {
    theta: f64,
    faces_before: usize,
    faces_after: usize,
    #[serde(flatten)]
    actions: ArtifactReport,
    config_hash: String,
}

/// Writes the filtered `parts/` and `report.json` into `out`.
pub fn run(record: &Path, layout: Option<&Path>, config: &PipelineConfig, out: &Path) -> CliResult<()> {
    let record = read_record(record)?;
    let layout = read_layout(layout, &record)?;
    if layout.boxes.len() != record.parts.len() {
        return Err(CliError::schema(format!(
            "layout has {} boxes but the record has {} parts",
            layout.boxes.len(),
            record.parts.len()
        )));
    }
    let theta = config.refine.artifact_theta;
    let (parts, actions) = filter_artifacts(&record.parts, &layout, theta)?;
    write_parts(&out.join("parts"), &parts)?;
    let report = Report {
        theta,
        faces_before: record.parts.iter().map(|p| p.faces.len()).sum(),
        faces_after: parts.iter().map(|p| p.faces.len()).sum(),
        actions,
        config_hash: config.hash(),
    };
    write_file(&out.join("report.json"), to_json(&report))?;
    eprintln!("{} faces removed", report.faces_before - report.faces_after);
    Ok(())
}

use std::path::Path;

use partkit_core::metrics::{evaluate, ObjectBox};
use partkit_core::PipelineConfig;

use crate::error::{CliError, CliResult};
use crate::io::{emit_json, read_layout, read_record};

pub fn run(
    record: &Path,
    layout: Option<&Path>,
    object_box: Option<ObjectBox>,
    ground_truth: Option<&Path>,
    config: &PipelineConfig,
    out: Option<&Path>,
) -> CliResult<()> {
    let record = read_record(record)?;
    let layout = read_layout(layout, &record)?;
    if layout.boxes.len() != record.parts.len() {
        return Err(CliError::schema(format!(
            "layout has {} boxes but the record has {} parts",
            layout.boxes.len(),
            record.parts.len()
        )));
    }
    let truth = ground_truth.map(read_record).transpose()?;
    let m = &config.metrics;
    let report = evaluate(
        &record.parts,
        &layout,
        object_box.unwrap_or(m.object_box),
        m.mc_samples,
        m.mc_seed,
        m.voxel_resolution,
        truth.as_ref().map(|t| t.parts.as_slice()),
    )?;
    emit_json(&report, out)
}

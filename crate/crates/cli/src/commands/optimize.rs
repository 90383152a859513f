use std::fmt::Write as _;
use std::path::Path;

use partkit_core::refine::optimize_layout;
use partkit_core::{PipelineConfig, SimilarityTransform};
use serde::Serialize;

use crate::error::CliResult;
use crate::io::{read_layout, read_record, to_json, write_file, write_parts};

#[derive(Serialize)]
struct Report {
    score: f64,
    identity_score: f64,
    iterations: usize,
    /// True when `transform.json` holds the layout-side (inverse) transform.
    inverse: bool,
    config_hash: String,
}

/// Writes `parts/`, `transform.json`, `trace.csv` and `report.json` into `out`.
pub fn run(record: &Path, layout: Option<&Path>, inverse: bool, config: &PipelineConfig, out: &Path) -> CliResult<()> {
    let record = read_record(record)?;
    let layout = read_layout(layout, &record)?;
    let result = optimize_layout(&record.parts, &layout, &config.refine.beam)?;
    let moved: Vec<_> = record.parts.iter().map(|p| result.transform.apply_mesh(p)).collect();
    write_parts(&out.join("parts"), &moved)?;
    let reported: SimilarityTransform = if inverse {
        result.transform.inverse()
    } else {
        result.transform
    };
    write_file(&out.join("transform.json"), to_json(&reported))?;

    let mut csv = String::from("iteration,best_score,delta_t,delta_s,delta_r_deg,improved\n");
    for r in &result.trace {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.iteration, r.best_score, r.delta_t, r.delta_s, r.delta_r_deg, r.improved
        )
        .expect("string write");
    }
    write_file(&out.join("trace.csv"), csv)?;

    let report = Report {
        score: result.score,
        identity_score: result.identity_score,
        iterations: result.trace.len(),
        inverse,
        config_hash: config.hash(),
    };
    write_file(&out.join("report.json"), to_json(&report))?;
    eprintln!("score {:.6} (identity {:.6})", result.score, result.identity_score);
    Ok(())
}

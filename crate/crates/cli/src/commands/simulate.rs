use std::path::Path;

use partkit_core::sampler::{
    gaussian_tokens, sample, write_latents, write_trace_csv, AnalyticField, FieldKind, LatentBlock, SampleOptions,
    SamplerConfig,
};
use partkit_core::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_json, to_json, write_file};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub part_id: usize,
    pub rows: usize,
    pub cols: usize,
    /// Seed of the initial Gaussian tokens.
    pub seed: u64,
}

/// Input of the `simulate` command.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub field: FieldKind,
    /// Overrides the sampler section of the pipeline config.
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    pub parts: Vec<PartSpec>,
    #[serde(default)]
    pub prompt: String,
    /// Parts whose tokens follow the reference run.
    #[serde(default)]
    pub freeze_mask: Option<Vec<bool>>,
    /// Added to every part seed to draw the reference run's initial tokens.
    #[serde(default)]
    pub reference_seed_offset: Option<u64>,
}

#[derive(Serialize)]
struct Summary {
    steps: usize,
    parts: usize,
    frozen: Vec<usize>,
    anneal_applications: u64,
    final_alpha: f64,
    /// L2 distance to the field target at the end, for target-seeking fields.
    final_target_error: Option<f64>,
}

fn blocks(parts: &[PartSpec], offset: u64) -> CliResult<Vec<LatentBlock>> {
    parts
        .iter()
        .map(|p| {
            let tokens = gaussian_tokens(p.rows, p.cols, p.seed.wrapping_add(offset));
            LatentBlock::new(p.part_id, tokens).map_err(|e| CliError::schema(format!("part {}: {e}", p.part_id)))
        })
        .collect()
}

fn target_error(field: &AnalyticField, latents: &[LatentBlock]) -> Option<f64> {
    let mut sum = 0.0;
    for b in latents {
        sum += (&b.tokens - field.target(b.part_id)?).norm_squared();
    }
    Some(sum.sqrt())
}

/// Writes `trace.csv`, `latents.bin` and `summary.json` into `out`.
pub fn run(scenario_path: &Path, config: &PipelineConfig, out: &Path) -> CliResult<()> {
    let scenario: Scenario = read_json(scenario_path)?;
    let sampler = scenario.sampler.clone().unwrap_or_else(|| config.sampler.clone());
    sampler
        .validate()
        .map_err(|e| CliError::schema(format!("sampler: {e}")))?;
    if scenario.parts.is_empty() {
        return Err(CliError::schema("parts: at least one part is required"));
    }
    let initial = blocks(&scenario.parts, 0)?;
    let field = AnalyticField::new(scenario.field.clone(), &initial);

    let mask = scenario.freeze_mask.as_deref();
    if let Some(m) = mask {
        if m.len() != initial.len() {
            return Err(CliError::schema(format!(
                "freeze_mask: {} entries for {} parts",
                m.len(),
                initial.len()
            )));
        }
    }
    let frozen: Vec<usize> = mask
        .map(|m| {
            m.iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(i, _)| scenario.parts[i].part_id)
                .collect()
        })
        .unwrap_or_default();
    let reference = if frozen.is_empty() {
        None
    } else {
        let offset = scenario
            .reference_seed_offset
            .ok_or_else(|| CliError::schema("reference_seed_offset: required when any part is frozen"))?;
        let opts = SampleOptions {
            prompt: &scenario.prompt,
            record_trajectory: true,
            ..Default::default()
        };
        Some(sample(&field, blocks(&scenario.parts, offset)?, &sampler, &opts)?.trajectory)
    };

    let opts = SampleOptions {
        prompt: &scenario.prompt,
        freeze_mask: mask,
        reference: reference.as_deref(),
        record_trajectory: true,
        ..Default::default()
    };
    let output = sample(&field, initial, &sampler, &opts)?;

    let errors: Option<Vec<f64>> = output.trajectory[1..].iter().map(|x| target_error(&field, x)).collect();
    let mut csv = Vec::new();
    write_trace_csv(&mut csv, &output.trace, errors.as_deref().map(|e| ("target_error", e)))?;
    write_file(&out.join("trace.csv"), csv)?;
    let mut bin = Vec::new();
    write_latents(&mut bin, &output.latents)?;
    write_file(&out.join("latents.bin"), bin)?;

    let summary = Summary {
        steps: sampler.steps,
        parts: output.latents.len(),
        frozen,
        anneal_applications: output.anneal.applications,
        final_alpha: output
            .trace
            .last()
            .and_then(|r| r.alphas.last().copied())
            .unwrap_or(1.0),
        final_target_error: errors.as_ref().and_then(|e| e.last().copied()),
    };
    write_file(&out.join("summary.json"), to_json(&summary))?;
    Ok(())
}

//! Client for an external captioning service.
//!
//! The service receives `POST {"images": [base64...], "prompt": template}`
//! and answers `{"caption": "..."}`. With `CAPTION_MOCK=1` no request is
//! made and the caption is a placeholder derived from the record contents.

use std::path::{Path, PathBuf};
use std::thread::sleep;
use std::time::Duration;

use anyhow::{anyhow, Context};
use base64::Engine;
use partkit_core::ShapeRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::{read_record, to_json, write_file};

pub const ENDPOINT_VAR: &str = "CAPTION_ENDPOINT";
pub const MOCK_VAR: &str = "CAPTION_MOCK";

pub const DEFAULT_TEMPLATE: &str = "The image shows one object from four viewpoints arranged in a 2x2 grid. \
Write one sentence describing its overall geometry and its parts: their shapes, counts and arrangement. \
Do not mention color, material or texture.";

pub const MAX_IMAGES: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct CaptionRequest {
    pub images: Vec<String>,
    pub prompt: String,
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

pub struct Retry {
    pub attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct Outcome {
    mode: &'static str,
    caption: Option<String>,
    attempts: usize,
    error: Option<String>,
}

pub fn build_request(images: &[PathBuf], template: &str) -> CliResult<CaptionRequest> {
    if template.trim().is_empty() {
        return Err(CliError::schema("caption template is empty"));
    }
    if images.is_empty() || images.len() > MAX_IMAGES {
        return Err(CliError::schema(format!(
            "expected 1 to {MAX_IMAGES} images, got {}",
            images.len()
        )));
    }
    let engine = base64::engine::general_purpose::STANDARD;
    let images = images
        .iter()
        .map(|p| {
            std::fs::read(p)
                .map(|bytes| engine.encode(bytes))
                .with_context(|| format!("reading image {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(CaptionRequest {
        images,
        prompt: template.to_string(),
    })
}

/// Deterministic stand-in caption for a record.
pub fn mock_caption(record: &ShapeRecord) -> String {
    let unprompted = ShapeRecord {
        prompt: None,
        ..record.clone()
    };
    let digest = Sha256::digest(unprompted.to_json().as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!(
        "placeholder caption {hex}: an object made of {} parts",
        record.parts.len()
    )
}

/// Posts the request, retrying failures with exponential backoff.
/// Returns the caption or the last error, with the number of attempts made.
pub fn request_caption(endpoint: &str, request: &CaptionRequest, retry: &Retry) -> (Result<String, String>, usize) {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(retry.timeout))
        .build()
        .into();
    let mut last = String::new();
    for attempt in 0..retry.attempts {
        if attempt > 0 {
            sleep(retry.backoff * (1 << (attempt - 1)));
        }
        let result = agent
            .post(endpoint)
            .send_json(request)
            .map_err(|e| anyhow!(e))
            .and_then(|mut r| r.body_mut().read_json::<CaptionResponse>().map_err(|e| anyhow!(e)));
        match result {
            Ok(r) => return (Ok(r.caption), attempt + 1),
            Err(e) => {
                eprintln!("caption attempt {} failed: {e}", attempt + 1);
                last = e.to_string();
            }
        }
    }
    (
        Err(format!("caption unavailable after {} attempts: {last}", retry.attempts)),
        retry.attempts,
    )
}

pub struct Args<'a> {
    pub record: &'a Path,
    pub images: &'a [PathBuf],
    pub template: &'a str,
    pub endpoint: Option<&'a str>,
    pub mock: bool,
    pub retry: Retry,
    pub out: &'a Path,
}

/// Writes the captioned record and `caption.json` into `out`. An unreachable
/// service leaves the prompt null and is not an error.
pub fn run(args: Args) -> CliResult<()> {
    let mut record = read_record(args.record)?;
    let outcome = if args.mock {
        Outcome {
            mode: "mock",
            caption: Some(mock_caption(&record)),
            attempts: 0,
            error: None,
        }
    } else {
        let endpoint = args.endpoint.ok_or_else(|| {
            CliError::schema(format!(
                "no endpoint: pass --endpoint, set {ENDPOINT_VAR} or {MOCK_VAR}=1"
            ))
        })?;
        let request = build_request(args.images, args.template)?;
        let (result, attempts) = request_caption(endpoint, &request, &args.retry);
        Outcome {
            mode: "http",
            attempts,
            caption: result.as_ref().ok().cloned(),
            error: result.err(),
        }
    };
    record.prompt = outcome.caption.clone();
    record.write(args.out)?;
    write_file(&args.out.join("caption.json"), to_json(&outcome))?;
    match &outcome.error {
        Some(e) => eprintln!("{e}; prompt left null"),
        None => println!("{}", outcome.caption.as_deref().unwrap_or_default()),
    }
    Ok(())
}

//! `partkit`: batch command line for part-aware shape processing.
//!
//! Exit codes: 0 success (shape rejections included), 1 internal or input
//! error, 2 malformed configuration or JSON input.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use partkit_core::metrics::ObjectBox;

use commands::{caption, clean, metrics, obb, optimize, segment, simulate, stats};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "partkit", version, about = "Part-aware 3D shape toolkit")]
struct Cli {
    /// Pipeline configuration (TOML or JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectBoxArg {
    Obb,
    Aabb,
}

#[derive(Subcommand)]
enum Command {
    /// Segment meshes into parts, filter them and write shape records.
    Segment {
        /// Mesh files or directories of meshes.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the minimum-volume oriented box of a mesh.
    Obb {
        input: PathBuf,
        /// Also fit each connected component.
        #[arg(long)]
        components: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Layout metrics of a record against a layout.
    Metrics {
        record: PathBuf,
        /// Layout JSON; the record's own boxes when omitted.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, value_enum)]
        object_box: Option<ObjectBoxArg>,
        /// Record whose parts replace the control boxes as the Voxel-IoU reference.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics over records or directories of records.
    Stats {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align a record's parts to a layout with one similarity transform.
    Optimize {
        record: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Report the inverse transform, to be applied to the layout.
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop floating components of parts that disagree with their boxes.
    Clean {
        record: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler on an analytic field scenario.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Request a caption for a record from the captioning service.
    Caption {
        record: PathBuf,
        /// Pre-rendered views, 1 to 4.
        #[arg(long = "image")]
        images: Vec<PathBuf>,
        #[arg(long, default_value = caption::DEFAULT_TEMPLATE)]
        template: String,
        #[arg(long, env = caption::ENDPOINT_VAR)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 3)]
        attempts: usize,
        #[arg(long, default_value_t = 500)]
        backoff_ms: u64,
        #[arg(long, default_value_t = 30)]
        timeout_s: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let config = io::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Segment { inputs, out } => {
            let errors = segment::run(&inputs, &config, &out)?;
            return Ok(if errors == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Obb { input, components, out } => obb::run(&input, components, out.as_deref())?,
        Command::Metrics {
            record,
            layout,
            object_box,
            ground_truth,
            out,
        } => {
            let object_box = object_box.map(|b| match b {
                ObjectBoxArg::Obb => ObjectBox::Obb,
                ObjectBoxArg::Aabb => ObjectBox::Aabb,
            });
            metrics::run(
                &record,
                layout.as_deref(),
                object_box,
                ground_truth.as_deref(),
                &config,
                out.as_deref(),
            )?
        }
        Command::Stats { inputs, bins, out } => stats::run(&inputs, bins, out.as_deref())?,
        Command::Optimize {
            record,
            layout,
            inverse,
            out,
        } => optimize::run(&record, layout.as_deref(), inverse, &config, &out)?,
        Command::Clean { record, layout, out } => clean::run(&record, layout.as_deref(), &config, &out)?,
        Command::Simulate { scenario, out } => simulate::run(&scenario, &config, &out)?,
        Command::Caption {
            record,
            images,
            template,
            endpoint,
            attempts,
            backoff_ms,
            timeout_s,
            out,
        } => {
            if attempts == 0 {
                return Err(CliError::schema("--attempts must be at least 1"));
            }
            let mock = std::env::var(caption::MOCK_VAR).is_ok_and(|v| v == "1");
            caption::run(caption::Args {
                record: &record,
                images: &images,
                template: &template,
                endpoint: endpoint.as_deref(),
                mock,
                retry: caption::Retry {
                    attempts,
                    backoff: Duration::from_millis(backoff_ms),
                    timeout: Duration::from_secs(timeout_s),
                },
                out: &out,
            })?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

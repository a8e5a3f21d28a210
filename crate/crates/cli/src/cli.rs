use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use iecc_core::{Algorithm, Similarity};
use serde::Serialize;

use crate::bench::{run_bench, write_bench, BenchPlan, Mode};
use crate::commands::{self, EncoderArgs};
use crate::error::CliError;
use crate::report::{render, to_csv, write_text, Format, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "iecc", version, about = "Palette-quantization image codec and change-gated stream simulator")]
pub struct Cli {
    /// Base PRNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (compress, decompress, metrics, histogram) or directory (bench, iec-sim).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Report format [default: json; csv for histogram].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize a PNG and write an IECC container.
    Compress {
        input: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// Reconstruct a PNG from an IECC container.
    Decompress { input: PathBuf },
    /// Full-reference quality of a reconstruction.
    Metrics {
        original: PathBuf,
        reconstructed: PathBuf,
        #[arg(long)]
        gray: bool,
    },
    /// Run the algorithm × K × run matrix and its significance tests.
    Bench(BenchArgs),
    /// Replay a directory of frames through the change gate.
    IecSim {
        frames: PathBuf,
        /// Similarity below which a frame is sent.
        #[arg(long, default_value_t = iecc_core::iec::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// ssim or one_minus_nrmse.
        #[arg(long, default_value = "ssim")]
        metric: Similarity,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// 256-bin per-channel histogram.
    Histogram {
        input: PathBuf,
        #[arg(long)]
        gray: bool,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct BenchArgs {
    /// PNG files or directories of PNG files.
    #[arg(long, required = true, num_args = 1..)]
    pub images: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "kmeans,kmeanspp,fcm,fcmpp")]
    pub algos: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32", value_parser = clap::value_parser!(u16).range(2..=256))]
    pub ks: Vec<u16>,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub restarts: u32,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "gray,rgb")]
    pub modes: Vec<Mode>,
    #[arg(long, default_value_t = Algorithm::KMeansPlusPlus)]
    pub baseline: Algorithm,
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_FUZZIFIER)]
    pub fuzzifier: f64,
    /// Cluster unique colors weighted by count instead of every pixel.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub dedup_colors: bool,
    /// Frame directory for the shared-versus-per-image palette comparison.
    #[arg(long)]
    pub centroid_study: Option<PathBuf>,
}

impl BenchArgs {
    pub fn plan(&self, seed: u64) -> BenchPlan {
        BenchPlan {
            images: self.images.clone(),
            algorithms: self.algos.clone(),
            ks: self.ks.iter().map(|&k| k as usize).collect(),
            runs: self.runs as usize,
            base_seed: seed,
            restarts: self.restarts as usize,
            modes: self.modes.clone(),
            baseline: self.baseline,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            fuzzifier: self.fuzzifier,
            dedup_colors: self.dedup_colors,
            centroid_study: self.centroid_study.clone(),
        }
    }
}

#[derive(Serialize)]
struct BenchSummary {
    schema_version: u32,
    output_dir: String,
    cells: usize,
    cells_skipped: usize,
    significance_cells: usize,
    defeated: usize,
    files: Vec<&'static str>,
}

fn require_output(output: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    output
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{what} needs --output")))
}

/// Prints to stdout, or writes to `--output` when the command has no
/// other file output.
fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::write("<stdout>", e))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Compress { input, encoder } => {
            let output = cli.output.clone().unwrap_or_else(|| input.with_extension("iecc"));
            let report = commands::compress(input, &output, encoder, cli.seed)?;
            emit(&render(&report, format)?, None)
        }
        Command::Decompress { input } => {
            let output = cli.output.clone().unwrap_or_else(|| input.with_extension("png"));
            let report = commands::decompress(input, &output)?;
            emit(&render(&report, format)?, None)
        }
        Command::Metrics {
            original,
            reconstructed,
            gray,
        } => {
            let report = commands::metrics(original, reconstructed, *gray)?;
            emit(&render(&report, format)?, cli.output.as_deref())
        }
        Command::Histogram { input, gray } => {
            let format = cli.format.unwrap_or(Format::Csv);
            emit(&commands::histogram(input, *gray, format)?, cli.output.as_deref())
        }
        Command::IecSim {
            frames,
            threshold,
            metric,
            encoder,
        } => {
            let output = require_output(&cli.output, "iec-sim")?;
            let report = commands::iec_sim(frames, &output, *threshold, *metric, encoder, cli.seed)?;
            let text = match format {
                Format::Json => render(&report, Format::Json)?,
                Format::Csv => to_csv(&report.frames)?,
            };
            emit(&text, None)
        }
        Command::Bench(args) => {
            let output = require_output(&cli.output, "bench")?;
            let plan = args.plan(cli.seed);
            let result = run_bench(&plan)?;
            let files = write_bench(&result, &plan, &output)?;
            let summary = BenchSummary {
                schema_version: SCHEMA_VERSION,
                output_dir: output.display().to_string(),
                cells: result.runs.len(),
                cells_skipped: result.runs.iter().filter(|r| !r.is_ok()).count(),
                significance_cells: result.significance.len(),
                defeated: result.significance.iter().filter(|c| c.defeated).count(),
                files,
            };
            emit(&render(&summary, format)?, None)
        }
    }
}

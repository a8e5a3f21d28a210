//! The single-file subcommands and the IEC stream simulation.

use std::path::{Path, PathBuf};

use iecc_core::codec::{decode, encode_with_outcome, serialize, PaletteSource};
use iecc_core::iec::run_stream_with;
use iecc_core::raster::histogram as raster_histogram;
use iecc_core::{
    compression_ratio, Algorithm, ClusterConfig, IecConfig, MetricsReport, RasterImage, Similarity,
};
use serde::Serialize;

use crate::error::CliError;
use crate::io::{create_dir, load_png, png_files, read_container, save_png, write_container, ColorMode};
use crate::report::{db, to_json, Format, SCHEMA_VERSION};

/// Clustering knobs shared by `compress` and `iec-sim`.
#[derive(Debug, Clone, clap::Args)]
pub struct EncoderArgs {
    /// Palette size, 1..=256.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u16).range(1..=256))]
    pub k: u16,
    #[arg(long, default_value_t = Algorithm::KMeansPlusPlus)]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub restarts: u32,
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// FCM fuzzifier m.
    #[arg(long, default_value_t = iecc_core::clustering::DEFAULT_FUZZIFIER)]
    pub fuzzifier: f64,
    /// Cluster unique colors weighted by count instead of every pixel.
    #[arg(long)]
    pub dedup_colors: bool,
    /// Convert the input to BT.601 grayscale first.
    #[arg(long)]
    pub gray: bool,
}

impl EncoderArgs {
    pub fn new(k: u16, algo: Algorithm) -> Self {
        Self {
            k,
            algo,
            restarts: 1,
            max_iterations: iecc_core::clustering::DEFAULT_MAX_ITERATIONS,
            tolerance: iecc_core::clustering::DEFAULT_TOLERANCE,
            fuzzifier: iecc_core::clustering::DEFAULT_FUZZIFIER,
            dedup_colors: false,
            gray: false,
        }
    }

    pub fn config(&self, seed: u64) -> Result<ClusterConfig<f64>, CliError> {
        let config = ClusterConfig::new(self.algo, self.k as usize)
            .with_seed(seed)
            .with_restarts(self.restarts as usize)
            .with_max_iterations(self.max_iterations)
            .with_tolerance(self.tolerance)
            .with_fuzzifier(self.fuzzifier)
            .with_dedup_colors(self.dedup_colors);
        config.validate()?;
        Ok(config)
    }

    fn color_mode(&self) -> ColorMode {
        if self.gray {
            ColorMode::Gray
        } else {
            ColorMode::Native
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressReport {
    pub schema_version: u32,
    pub input: String,
    pub output: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub k: usize,
    pub algorithm: String,
    pub seed: u64,
    pub restarts: usize,
    pub bits_per_index: u32,
    pub mse: f64,
    pub rmse: f64,
    #[serde(serialize_with = "db")]
    pub psnr_db: f64,
    pub ssim: f64,
    /// Undefined for K = 1.
    pub ratio_eq1: Option<f64>,
    pub ratio_on_disk: f64,
    pub container_bytes: usize,
    pub raw_bytes: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn compress(
    input: &Path,
    output: &Path,
    encoder: &EncoderArgs,
    seed: u64,
) -> Result<CompressReport, CliError> {
    let image = load_png(input, encoder.color_mode())?;
    let config = encoder.config(seed)?;
    let (compressed, outcome) = encode_with_outcome(&image, &config)?;
    let container_bytes = write_container(output, &compressed)?;
    let restored = decode(&compressed)?;
    let metrics = MetricsReport::<f64>::compute(&image, &restored, None)?;
    Ok(CompressReport {
        schema_version: SCHEMA_VERSION,
        input: input.display().to_string(),
        output: output.display().to_string(),
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        k: config.k,
        algorithm: config.algorithm.name().to_string(),
        seed,
        restarts: config.restarts,
        bits_per_index: compressed.indices.bits_per_index(),
        mse: metrics.mse,
        rmse: metrics.rmse,
        psnr_db: metrics.psnr,
        ssim: metrics.ssim,
        ratio_eq1: compression_ratio(image.width(), image.height(), image.channels(), config.k).ok(),
        ratio_on_disk: compressed.on_disk_ratio(),
        container_bytes,
        raw_bytes: image.samples().len(),
        objective: outcome.objective,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompressReport {
    pub schema_version: u32,
    pub input: String,
    pub output: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub k: usize,
    pub palette_source: String,
    pub seed: u64,
}

pub fn decompress(input: &Path, output: &Path) -> Result<DecompressReport, CliError> {
    let compressed = read_container(input)?;
    let image = decode(&compressed).map_err(|source| CliError::Malformed {
        path: input.to_path_buf(),
        source,
    })?;
    save_png(output, &image)?;
    Ok(DecompressReport {
        schema_version: SCHEMA_VERSION,
        input: input.display().to_string(),
        output: output.display().to_string(),
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        k: compressed.k(),
        palette_source: match compressed.header.source {
            PaletteSource::Clustered(algo) => algo.name().to_string(),
            PaletteSource::External => "external".to_string(),
        },
        seed: compressed.header.seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsFileReport {
    pub schema_version: u32,
    pub original: String,
    pub reconstructed: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub mse: f64,
    pub rmse: f64,
    #[serde(serialize_with = "db")]
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn metrics(original: &Path, reconstructed: &Path, gray: bool) -> Result<MetricsFileReport, CliError> {
    let mode = if gray { ColorMode::Gray } else { ColorMode::Native };
    let a = load_png(original, mode)?;
    let b = load_png(reconstructed, mode)?;
    let report = MetricsReport::<f64>::compute(&a, &b, None)?;
    Ok(MetricsFileReport {
        schema_version: SCHEMA_VERSION,
        original: original.display().to_string(),
        reconstructed: reconstructed.display().to_string(),
        width: a.width(),
        height: a.height(),
        channels: a.channels(),
        mse: report.mse,
        rmse: report.rmse,
        psnr_db: report.psnr,
        ssim: report.ssim,
    })
}

fn channel_names(channels: usize) -> &'static [&'static str] {
    if channels == 1 {
        &["gray"]
    } else {
        &["r", "g", "b"]
    }
}

#[derive(Debug, Clone, Serialize)]
struct HistogramJson<'a> {
    schema_version: u32,
    input: String,
    pixel_count: usize,
    channels: &'a [&'a str],
    counts: Vec<Vec<u64>>,
}

/// 256-bin per-channel counts, rendered as CSV (one row per value) or JSON.
pub fn histogram(input: &Path, gray: bool, format: Format) -> Result<String, CliError> {
    let mode = if gray { ColorMode::Gray } else { ColorMode::Native };
    let image = load_png(input, mode)?;
    let hist = raster_histogram(&image);
    let names = channel_names(image.channels());
    match format {
        Format::Json => to_json(&HistogramJson {
            schema_version: SCHEMA_VERSION,
            input: input.display().to_string(),
            pixel_count: image.pixel_count(),
            channels: names,
            counts: (0..hist.channels()).map(|c| hist.channel(c).to_vec()).collect(),
        }),
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["schema_version".to_string(), "value".to_string()];
            header.extend(names.iter().map(|n| n.to_string()));
            let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
            writer.write_record(&header).map_err(csv_err)?;
            for value in 0..=255u8 {
                let mut record = vec![SCHEMA_VERSION.to_string(), value.to_string()];
                record.extend((0..hist.channels()).map(|c| hist.count(c, value).to_string()));
                writer.write_record(&record).map_err(csv_err)?;
            }
            let bytes = writer.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IecFrameRow {
    pub index: usize,
    pub file: String,
    pub similarity: Option<f64>,
    pub sent: bool,
    pub bytes: usize,
    pub container: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IecSimReport {
    pub schema_version: u32,
    pub frames_dir: String,
    pub output_dir: String,
    pub threshold: f64,
    pub metric: String,
    pub k: usize,
    pub algorithm: String,
    pub seed: u64,
    pub restarts: usize,
    pub frames_seen: usize,
    pub frames_sent: usize,
    pub frames_skipped: usize,
    pub bytes_sent: usize,
    pub bytes_baseline: usize,
    pub savings: f64,
    pub frames: Vec<IecFrameRow>,
}

pub const IEC_REPORT_FILE: &str = "iec_report.json";

pub fn iec_sim(
    frames_dir: &Path,
    output_dir: &Path,
    threshold: f64,
    metric: Similarity,
    encoder: &EncoderArgs,
    seed: u64,
) -> Result<IecSimReport, CliError> {
    let config = IecConfig::new(threshold, metric, encoder.config(seed)?)?;
    let files = png_files(frames_dir)?;
    if files.is_empty() {
        return Err(CliError::input(frames_dir, "no .png frames"));
    }
    let frames = files
        .iter()
        .map(|path| load_png(path, encoder.color_mode()))
        .collect::<Result<Vec<RasterImage>, _>>()?;
    create_dir(output_dir)?;

    let container_name = |index: usize| -> String {
        let stem = files[index].file_stem().unwrap_or_default().to_string_lossy();
        format!("{stem}.iecc")
    };
    let mut containers: Vec<(usize, PathBuf, Vec<u8>)> = Vec::new();
    let report = run_stream_with(&frames, &config, |index, compressed| {
        containers.push((index, output_dir.join(container_name(index)), serialize(compressed)));
    })
    .map_err(|e| match e {
        iecc_core::IecError::ShapeDrift { index, source } => {
            CliError::Data(format!("{}: {source}", files[index].display()))
        }
        other => other.into(),
    })?;
    for (_, path, bytes) in &containers {
        crate::io::write_bytes(path, bytes)?;
    }

    let frames = report
        .frames
        .iter()
        .map(|record| IecFrameRow {
            index: record.index,
            file: files[record.index].file_name().unwrap_or_default().to_string_lossy().into_owned(),
            similarity: record.similarity,
            sent: record.sent,
            bytes: record.bytes,
            container: record.sent.then(|| container_name(record.index)),
        })
        .collect();
    let sim_report = IecSimReport {
        schema_version: SCHEMA_VERSION,
        frames_dir: frames_dir.display().to_string(),
        output_dir: output_dir.display().to_string(),
        threshold,
        metric: metric.name().to_string(),
        k: encoder.k as usize,
        algorithm: encoder.algo.name().to_string(),
        seed,
        restarts: encoder.restarts as usize,
        frames_seen: report.frames_seen,
        frames_sent: report.frames_sent,
        frames_skipped: report.frames_skipped,
        bytes_sent: report.bytes_sent,
        bytes_baseline: report.bytes_baseline,
        savings: report.savings,
        frames,
    };
    crate::report::write_text(&output_dir.join(IEC_REPORT_FILE), &to_json(&sim_report)?)?;
    Ok(sim_report)
}

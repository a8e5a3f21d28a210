//! The benchmark matrix: images × color modes × K × algorithms × runs.
//!
//! Run `r` of every cell uses seed `base_seed + r`, so the same run index is
//! paired across algorithms. Results are collected in job order, which keeps
//! every emitted file byte-identical between invocations with equal flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use iecc_core::codec::{decode, encode_with_outcome, encode_with_palette};
use iecc_core::metrics::rmse;
use iecc_core::raster::to_grayscale;
use iecc_core::stats::{compare_algorithms, median, MetricKind};
use iecc_core::{compression_ratio, Algorithm, ClusterConfig, CodecError, ClusterError, MetricsReport, RasterImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{create_dir, expand_inputs, load_png, png_files, ColorMode};
use crate::report::{db_opt, to_csv, to_json, write_text, SCHEMA_VERSION};

pub const RUNS_FILE: &str = "runs.csv";
pub const SIGNIFICANCE_CSV: &str = "significance.csv";
pub const SIGNIFICANCE_JSON: &str = "significance.json";
pub const TREND_FILE: &str = "rmse_vs_k.csv";
pub const CENTROID_STUDY_FILE: &str = "centroid_study.csv";
pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gray,
    Rgb,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Gray => "gray",
            Mode::Rgb => "rgb",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub images: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub ks: Vec<usize>,
    pub runs: usize,
    pub base_seed: u64,
    pub restarts: usize,
    pub modes: Vec<Mode>,
    pub baseline: Algorithm,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub fuzzifier: f64,
    pub dedup_colors: bool,
    pub centroid_study: Option<PathBuf>,
}

impl BenchPlan {
    pub fn new(images: Vec<PathBuf>) -> Self {
        Self {
            images,
            algorithms: Algorithm::ALL.to_vec(),
            ks: vec![4, 8, 16, 32],
            runs: 30,
            base_seed: 0,
            restarts: 1,
            modes: vec![Mode::Gray, Mode::Rgb],
            baseline: Algorithm::KMeansPlusPlus,
            max_iterations: iecc_core::clustering::DEFAULT_MAX_ITERATIONS,
            tolerance: iecc_core::clustering::DEFAULT_TOLERANCE,
            fuzzifier: iecc_core::clustering::DEFAULT_FUZZIFIER,
            dedup_colors: true,
            centroid_study: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if self.runs == 0 {
            return usage("runs must be at least 1");
        }
        if self.ks.is_empty() || self.ks.iter().any(|&k| !(2..=256).contains(&k)) {
            return usage("every K must lie in 2..=256");
        }
        if self.algorithms.is_empty() || self.modes.is_empty() {
            return usage("at least one algorithm and one color mode are required");
        }
        let mut algos = self.algorithms.clone();
        algos.sort_by_key(|a| a.tag());
        algos.dedup();
        if algos.len() != self.algorithms.len() {
            return usage("algorithms must be distinct");
        }
        self.config(self.algorithms[0], self.ks[0], 0).validate()?;
        Ok(())
    }

    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    pub fn config(&self, algorithm: Algorithm, k: usize, seed: u64) -> ClusterConfig<f64> {
        ClusterConfig::new(algorithm, k)
            .with_seed(seed)
            .with_restarts(self.restarts)
            .with_max_iterations(self.max_iterations)
            .with_tolerance(self.tolerance)
            .with_fuzzifier(self.fuzzifier)
            .with_dedup_colors(self.dedup_colors)
    }
}

/// One cell × run of the matrix. Metric fields are empty when skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub schema_version: u32,
    pub image: String,
    pub mode: Mode,
    pub k: usize,
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    pub restarts: usize,
    pub status: String,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    #[serde(serialize_with = "db_opt")]
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub ratio_eq1: f64,
    pub note: String,
}

impl RunRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn metric(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::Rmse => self.rmse,
            MetricKind::Psnr => self.psnr_db,
            MetricKind::Ssim => self.ssim,
        }
    }
}

/// Baseline versus one other algorithm for one (K, mode, metric).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceCell {
    pub k: usize,
    pub mode: Mode,
    pub metric: String,
    pub algorithm: String,
    pub baseline: String,
    pub n_pairs: usize,
    pub n_effective: Option<usize>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub method: String,
    #[serde(serialize_with = "db_opt")]
    pub baseline_median: Option<f64>,
    #[serde(serialize_with = "db_opt")]
    pub other_median: Option<f64>,
    pub defeated: bool,
    pub error: Option<String>,
}

/// Per-image medians across runs, for plotting quality against K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub schema_version: u32,
    pub image: String,
    pub mode: Mode,
    pub algorithm: String,
    pub k: usize,
    pub runs_ok: usize,
    pub median_rmse: f64,
    #[serde(serialize_with = "crate::report::db")]
    pub median_psnr_db: f64,
    pub median_ssim: f64,
    pub mean_rmse: f64,
}

/// Per-image palette versus the palette trained on the first frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentroidRow {
    pub schema_version: u32,
    pub mode: Mode,
    pub k: usize,
    pub algorithm: String,
    pub seed: u64,
    pub frame: usize,
    pub file: String,
    pub training: bool,
    pub per_image_rmse: f64,
    pub shared_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub runs: Vec<RunRow>,
    pub significance: Vec<SignificanceCell>,
    pub trend: Vec<TrendRow>,
    pub centroid_study: Vec<CentroidRow>,
}

struct LoadedImage {
    label: String,
    rgb: RasterImage,
    gray: RasterImage,
}

impl LoadedImage {
    fn load(path: &Path) -> Result<Self, CliError> {
        let rgb = load_png(path, ColorMode::Rgb)?;
        let gray = to_grayscale(&rgb).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(Self {
            label: path.display().to_string(),
            rgb,
            gray,
        })
    }

    fn view(&self, mode: Mode) -> &RasterImage {
        match mode {
            Mode::Gray => &self.gray,
            Mode::Rgb => &self.rgb,
        }
    }
}

fn is_degenerate(e: &CodecError) -> bool {
    matches!(
        e,
        CodecError::Degenerate { .. } | CodecError::Cluster(ClusterError::Degenerate { .. })
    )
}

fn run_cell(
    plan: &BenchPlan,
    image: &LoadedImage,
    mode: Mode,
    k: usize,
    algorithm: Algorithm,
    run: usize,
) -> Result<RunRow, CliError> {
    let raster = image.view(mode);
    let seed = plan.seed(run);
    let mut row = RunRow {
        schema_version: SCHEMA_VERSION,
        image: image.label.clone(),
        mode,
        k,
        algorithm: algorithm.name().to_string(),
        run,
        seed,
        restarts: plan.restarts,
        status: "ok".to_string(),
        mse: None,
        rmse: None,
        psnr_db: None,
        ssim: None,
        objective: None,
        iterations: None,
        converged: None,
        ratio_eq1: compression_ratio(raster.width(), raster.height(), raster.channels(), k)?,
        note: String::new(),
    };
    match encode_with_outcome(raster, &plan.config(algorithm, k, seed)) {
        Ok((compressed, outcome)) => {
            let restored = decode(&compressed)?;
            let metrics = MetricsReport::<f64>::compute(raster, &restored, None)?;
            row.mse = Some(metrics.mse);
            row.rmse = Some(metrics.rmse);
            row.psnr_db = Some(metrics.psnr);
            row.ssim = Some(metrics.ssim);
            row.objective = Some(outcome.objective);
            row.iterations = Some(outcome.iterations);
            row.converged = Some(outcome.converged);
        }
        Err(e) if is_degenerate(&e) => {
            row.status = "skipped".to_string();
            row.note = e.to_string();
        }
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

/// Paired per-algorithm samples for one (K, mode, metric), keyed by
/// (image position, run). Pairs missing for any algorithm are dropped.
pub fn paired_table(
    rows: &[RunRow],
    algorithms: &[Algorithm],
    k: usize,
    mode: Mode,
    metric: MetricKind,
) -> Vec<(String, Vec<f64>)> {
    let mut by_algo: BTreeMap<&str, BTreeMap<(&str, usize), f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.k == k && r.mode == mode && r.is_ok()) {
        if let Some(v) = row.metric(metric) {
            by_algo
                .entry(row.algorithm.as_str())
                .or_default()
                .insert((row.image.as_str(), row.run), v);
        }
    }
    let keys: Vec<(&str, usize)> = match by_algo.get(algorithms[0].name()) {
        Some(first) => first
            .keys()
            .filter(|key| algorithms.iter().all(|a| by_algo.get(a.name()).is_some_and(|m| m.contains_key(*key))))
            .copied()
            .collect(),
        None => Vec::new(),
    };
    algorithms
        .iter()
        .map(|a| {
            let values = keys.iter().map(|key| by_algo[a.name()][key]).collect();
            (a.name().to_string(), values)
        })
        .collect()
}

pub fn significance(rows: &[RunRow], plan: &BenchPlan) -> Vec<SignificanceCell> {
    let mut cells = Vec::new();
    if plan.algorithms.len() < 2 || !plan.algorithms.contains(&plan.baseline) {
        return cells;
    }
    let baseline = plan.baseline.name();
    for &k in &plan.ks {
        for &mode in &plan.modes {
            for metric in MetricKind::ALL {
                let table = paired_table(rows, &plan.algorithms, k, mode, metric);
                let n_pairs = table[0].1.len();
                let blank = |algorithm: &str, error: String| SignificanceCell {
                    k,
                    mode,
                    metric: metric.name().to_string(),
                    algorithm: algorithm.to_string(),
                    baseline: baseline.to_string(),
                    n_pairs,
                    n_effective: None,
                    statistic: None,
                    p_value: None,
                    method: "undefined".to_string(),
                    baseline_median: None,
                    other_median: None,
                    defeated: false,
                    error: Some(error),
                };
                match compare_algorithms(&table, baseline, metric) {
                    Ok(comparisons) => cells.extend(comparisons.into_iter().map(|c| {
                        let mut cell = blank(&c.algorithm, String::new());
                        cell.baseline_median = Some(c.baseline_median);
                        cell.other_median = Some(c.other_median);
                        cell.defeated = c.defeated;
                        match c.test {
                            Ok(t) => {
                                cell.n_effective = Some(t.n_effective);
                                cell.statistic = Some(t.statistic);
                                cell.p_value = Some(t.p_value);
                                cell.method = t.method.name().to_string();
                                cell.error = None;
                            }
                            Err(e) => cell.error = Some(e.to_string()),
                        }
                        cell
                    })),
                    Err(e) => cells.extend(
                        plan.algorithms
                            .iter()
                            .filter(|a| **a != plan.baseline)
                            .map(|a| blank(a.name(), e.to_string())),
                    ),
                }
            }
        }
    }
    cells
}

pub fn trend(rows: &[RunRow]) -> Vec<TrendRow> {
    let mut groups: BTreeMap<(usize, Mode, u8, usize), Vec<&RunRow>> = BTreeMap::new();
    let image_pos: BTreeMap<&str, usize> = rows
        .iter()
        .map(|r| r.image.as_str())
        .enumerate()
        .map(|(i, name)| (name, i))
        .rev()
        .collect();
    for row in rows.iter().filter(|r| r.is_ok()) {
        let algo: Algorithm = row.algorithm.parse().expect("rows carry known algorithm names");
        groups
            .entry((image_pos[row.image.as_str()], row.mode, algo.tag(), row.k))
            .or_default()
            .push(row);
    }
    groups
        .into_values()
        .map(|group| {
            let values = |m: MetricKind| group.iter().filter_map(|r| r.metric(m)).collect::<Vec<f64>>();
            let rmses = values(MetricKind::Rmse);
            TrendRow {
                schema_version: SCHEMA_VERSION,
                image: group[0].image.clone(),
                mode: group[0].mode,
                algorithm: group[0].algorithm.clone(),
                k: group[0].k,
                runs_ok: group.len(),
                median_rmse: median(&rmses).unwrap_or(f64::NAN),
                median_psnr_db: median(&values(MetricKind::Psnr)).unwrap_or(f64::NAN),
                median_ssim: median(&values(MetricKind::Ssim)).unwrap_or(f64::NAN),
                mean_rmse: rmses.iter().sum::<f64>() / rmses.len() as f64,
            }
        })
        .collect()
}

/// Trains a palette on the first frame and compares it, frame by frame,
/// with a palette clustered on each frame itself.
pub fn centroid_study(
    frames: &[(String, RasterImage)],
    config: &ClusterConfig<f64>,
    mode: Mode,
) -> Result<Vec<CentroidRow>, CliError> {
    let Some((_, training)) = frames.first() else {
        return Err(CliError::Data("centroid study needs at least one frame".into()));
    };
    let (_, trained) = encode_with_outcome(training, config)?;
    frames
        .par_iter()
        .enumerate()
        .map(|(index, (file, frame))| {
            let own = decode(&encode_with_outcome(frame, config)?.0)?;
            let shared = decode(&encode_with_palette(frame, &trained.centroids)?)?;
            Ok(CentroidRow {
                schema_version: SCHEMA_VERSION,
                mode,
                k: config.k,
                algorithm: config.algorithm.name().to_string(),
                seed: config.seed,
                frame: index,
                file: file.clone(),
                training: index == 0,
                per_image_rmse: rmse(frame, &own)?,
                shared_rmse: rmse(frame, &shared)?,
            })
        })
        .collect()
}

fn load_frames(dir: &Path, mode: Mode) -> Result<Vec<(String, RasterImage)>, CliError> {
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(CliError::input(dir, "no .png frames"));
    }
    let color = match mode {
        Mode::Gray => ColorMode::Gray,
        Mode::Rgb => ColorMode::Rgb,
    };
    files
        .iter()
        .map(|path| {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            load_png(path, color).map(|img| (name, img))
        })
        .collect()
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchOutput, CliError> {
    plan.validate()?;
    let paths = expand_inputs(&plan.images)?;
    if paths.is_empty() {
        return Err(CliError::Usage("the image set is empty".into()));
    }
    let images = paths
        .par_iter()
        .map(|p| LoadedImage::load(p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut jobs = Vec::new();
    for image in &images {
        for &mode in &plan.modes {
            for &k in &plan.ks {
                for &algorithm in &plan.algorithms {
                    for run in 0..plan.runs {
                        jobs.push((image, mode, k, algorithm, run));
                    }
                }
            }
        }
    }
    let runs = jobs
        .par_iter()
        .map(|&(image, mode, k, algorithm, run)| run_cell(plan, image, mode, k, algorithm, run))
        .collect::<Result<Vec<_>, _>>()?;

    let mut study = Vec::new();
    if let Some(dir) = &plan.centroid_study {
        for &mode in &plan.modes {
            let frames = load_frames(dir, mode)?;
            for &k in &plan.ks {
                match centroid_study(&frames, &plan.config(plan.baseline, k, plan.base_seed), mode) {
                    Ok(rows) => study.extend(rows),
                    Err(CliError::Data(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    Ok(BenchOutput {
        significance: significance(&runs, plan),
        trend: trend(&runs),
        runs,
        centroid_study: study,
    })
}

/// Wide layout: one row per (K, algorithm), one column group per
/// (metric, mode).
pub fn significance_wide_csv(cells: &[SignificanceCell], plan: &BenchPlan) -> Result<String, CliError> {
    let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["schema_version", "k", "algorithm", "baseline", "n_pairs"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for metric in MetricKind::ALL {
        for mode in &plan.modes {
            for field in ["p_value", "method", "defeated"] {
                header.push(format!("{}_{}_{field}", metric.name(), mode.name()));
            }
        }
    }
    writer.write_record(&header).map_err(csv_err)?;
    let others: Vec<&Algorithm> = plan.algorithms.iter().filter(|a| **a != plan.baseline).collect();
    for &k in &plan.ks {
        for algorithm in &others {
            let pick = |metric: MetricKind, mode: Mode| {
                cells.iter().find(|c| {
                    c.k == k && c.mode == mode && c.metric == metric.name() && c.algorithm == algorithm.name()
                })
            };
            let Some(first) = pick(MetricKind::Rmse, plan.modes[0]) else {
                continue;
            };
            let mut record = vec![
                SCHEMA_VERSION.to_string(),
                k.to_string(),
                algorithm.name().to_string(),
                plan.baseline.name().to_string(),
                first.n_pairs.to_string(),
            ];
            for metric in MetricKind::ALL {
                for &mode in &plan.modes {
                    match pick(metric, mode) {
                        Some(c) => {
                            record.push(c.p_value.map(|p| format!("{p:e}")).unwrap_or_default());
                            record.push(c.method.clone());
                            record.push(c.defeated.to_string());
                        }
                        None => record.extend(["".into(), "undefined".into(), "false".into()]),
                    }
                }
            }
            writer.write_record(&record).map_err(csv_err)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Serialize)]
struct PlanRecord<'a> {
    schema_version: u32,
    images: Vec<String>,
    algorithms: Vec<&'static str>,
    ks: &'a [usize],
    runs: usize,
    base_seed: u64,
    seed_rule: &'static str,
    restarts: usize,
    modes: &'a [Mode],
    baseline: &'static str,
    max_iterations: usize,
    tolerance: f64,
    fuzzifier: f64,
    dedup_colors: bool,
    centroid_study: Option<String>,
    cells: usize,
    cells_skipped: usize,
    files: Vec<&'static str>,
}

#[derive(Serialize)]
struct SignificanceReport<'a> {
    schema_version: u32,
    alpha: f64,
    cells: &'a [SignificanceCell],
}

/// Writes every report into `dir` and returns the file names written.
pub fn write_bench(output: &BenchOutput, plan: &BenchPlan, dir: &Path) -> Result<Vec<&'static str>, CliError> {
    create_dir(dir)?;
    let mut files = vec![RUNS_FILE, TREND_FILE];
    write_text(&dir.join(RUNS_FILE), &to_csv(&output.runs)?)?;
    write_text(&dir.join(TREND_FILE), &to_csv(&output.trend)?)?;
    if !output.significance.is_empty() {
        write_text(&dir.join(SIGNIFICANCE_CSV), &significance_wide_csv(&output.significance, plan)?)?;
        write_text(
            &dir.join(SIGNIFICANCE_JSON),
            &to_json(&SignificanceReport {
                schema_version: SCHEMA_VERSION,
                alpha: iecc_core::stats::ALPHA,
                cells: &output.significance,
            })?,
        )?;
        files.extend([SIGNIFICANCE_CSV, SIGNIFICANCE_JSON]);
    }
    if !output.centroid_study.is_empty() {
        write_text(&dir.join(CENTROID_STUDY_FILE), &to_csv(&output.centroid_study)?)?;
        files.push(CENTROID_STUDY_FILE);
    }
    files.push(PLAN_FILE);
    let images = expand_inputs(&plan.images)?.iter().map(|p| p.display().to_string()).collect();
    let record = PlanRecord {
        schema_version: SCHEMA_VERSION,
        images,
        algorithms: plan.algorithms.iter().map(|a| a.name()).collect(),
        ks: &plan.ks,
        runs: plan.runs,
        base_seed: plan.base_seed,
        seed_rule: "base_seed + run",
        restarts: plan.restarts,
        modes: &plan.modes,
        baseline: plan.baseline.name(),
        max_iterations: plan.max_iterations,
        tolerance: plan.tolerance,
        fuzzifier: plan.fuzzifier,
        dedup_colors: plan.dedup_colors,
        centroid_study: plan.centroid_study.as_ref().map(|p| p.display().to_string()),
        cells: output.runs.len(),
        cells_skipped: output.runs.iter().filter(|r| !r.is_ok()).count(),
        files: files.clone(),
    };
    write_text(&dir.join(PLAN_FILE), &to_json(&record)?)?;
    Ok(files)
}

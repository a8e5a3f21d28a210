//! Wilcoxon signed-rank test and the paired algorithm comparison built on it.

use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest effective sample size that gets the exact null distribution.
pub const EXACT_MAX_N: usize = 20;
/// Significance level used for the "defeated" judgment.
pub const ALPHA: f64 = 0.05;
/// Fewest paired runs for which a two-sided exact p can fall below 5%
/// (2/2⁶ = 0.03125; with five runs the floor is 0.0625).
pub const MIN_RUNS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("every paired difference is zero; the test is undefined")]
    AllZeroDifferences,
    #[error("need at least two algorithms to compare")]
    TooFewAlgorithms,
    #[error("baseline `{0}` not present in the run table")]
    MissingBaseline(String),
    #[error("algorithm `{algorithm}` has {actual} runs, expected {expected}")]
    UnequalRuns {
        algorithm: String,
        expected: usize,
        actual: usize,
    },
    #[error("{0} paired run(s) cannot reach the 5% level; need at least {MIN_RUNS}")]
    TooFewRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    #[default]
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApprox => "normal_approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult<F> {
    /// W = min(W⁺, W⁻).
    pub statistic: F,
    pub w_plus: F,
    pub w_minus: F,
    pub p_value: F,
    pub n_effective: usize,
    pub method: TestMethod,
}

/// Midranks (1-based) of `values`, ties sharing the average of their positions.
pub fn midranks<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![F::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1..=end average to (start + end + 1) / 2.
        let rank = F::from_usize_lossy(start + end + 1) / F::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Paired two-sided Wilcoxon signed-rank test on `x − y`.
///
/// Zero differences are dropped and tied magnitudes share midranks. Up to
/// [`EXACT_MAX_N`] nonzero differences the p-value comes from the exact
/// permutation distribution of W⁺ over all 2ⁿ sign assignments; beyond that
/// a normal approximation with tie and continuity corrections is used.
/// The two-sided p is `min(1, 2·P(W⁺ ≤ W))`.
pub fn wilcoxon_signed_rank<F: Scalar>(
    x: &[F],
    y: &[F],
    sidedness: Sidedness,
) -> Result<TestResult<F>, StatsError> {
    wilcoxon_signed_rank_with(x, y, sidedness, None)
}

/// [`wilcoxon_signed_rank`] with the p-value method forced when `method`
/// is given.
pub fn wilcoxon_signed_rank_with<F: Scalar>(
    x: &[F],
    y: &[F],
    _sidedness: Sidedness,
    method: Option<TestMethod>,
) -> Result<TestResult<F>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    // Equal values (including equal infinities) count as zero differences.
    let diffs: Vec<F> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a != b)
        .map(|(&a, &b)| a - b)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let magnitudes: Vec<F> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&magnitudes);
    let (mut w_plus, mut w_minus) = (F::zero(), F::zero());
    for (d, &r) in diffs.iter().zip(&ranks) {
        if *d > F::zero() {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let statistic = w_plus.min(w_minus);
    let method = method.unwrap_or(if n <= EXACT_MAX_N {
        TestMethod::Exact
    } else {
        TestMethod::NormalApprox
    });
    let p = match method {
        TestMethod::Exact => exact_p(&ranks, statistic),
        TestMethod::NormalApprox => normal_p(&magnitudes, n, statistic),
    };
    Ok(TestResult {
        statistic,
        w_plus,
        w_minus,
        p_value: p.clamp(F::zero(), F::one()),
        n_effective: n,
        method,
    })
}

/// Counts sign assignments by their W⁺ on doubled (integer) midranks.
fn exact_p<F: Scalar>(ranks: &[F], statistic: F) -> F {
    let doubled: Vec<usize> = ranks
        .iter()
        .map(|r| (r.as_f64() * 2.0).round() as usize)
        .collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let limit = (statistic.as_f64() * 2.0).round() as usize;
    let tail: u64 = counts[..=limit.min(total)].iter().sum();
    let assignments = 2f64.powi(ranks.len() as i32);
    F::lit((2.0 * tail as f64 / assignments).min(1.0))
}

fn normal_p<F: Scalar>(magnitudes: &[F], n: usize, statistic: F) -> F {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted: Vec<f64> = magnitudes.iter().map(|m| m.as_f64()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let end = start + sorted[start..].iter().take_while(|&&v| v == sorted[start]).count();
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let deviation = statistic.as_f64() - mean;
    // Continuity correction toward the mean.
    let corrected = if deviation < 0.0 {
        (deviation + 0.5).min(0.0)
    } else {
        0.0
    };
    let z = corrected / variance.sqrt();
    let normal = Normal::standard();
    F::lit((2.0 * normal.cdf(z)).min(1.0))
}

/// Quality metric of a per-run table, with its preferred direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Rmse,
    Psnr,
    Ssim,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Rmse, MetricKind::Psnr, MetricKind::Ssim];

    pub fn lower_is_better(self) -> bool {
        matches!(self, MetricKind::Rmse)
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
        }
    }
}

pub fn median<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else if sorted[mid - 1] == sorted[mid] {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / F::lit(2.0)
    })
}

/// One cell of the significance table: baseline versus `algorithm`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<F> {
    pub algorithm: String,
    pub metric: MetricKind,
    pub test: Result<TestResult<F>, StatsError>,
    pub baseline_median: F,
    pub other_median: F,
    /// Significant at [`ALPHA`] and the baseline's median is the better one.
    pub defeated: bool,
}

/// Tests every non-baseline column of `table` against the baseline column.
/// Columns are paired run-by-run (same seed per run index).
pub fn compare_algorithms<F: Scalar>(
    table: &[(String, Vec<F>)],
    baseline: &str,
    metric: MetricKind,
) -> Result<Vec<Comparison<F>>, StatsError> {
    if table.len() < 2 {
        return Err(StatsError::TooFewAlgorithms);
    }
    let base = table
        .iter()
        .find(|(name, _)| name == baseline)
        .map(|(_, runs)| runs)
        .ok_or_else(|| StatsError::MissingBaseline(baseline.to_string()))?;
    for (name, runs) in table {
        if runs.len() != base.len() {
            return Err(StatsError::UnequalRuns {
                algorithm: name.clone(),
                expected: base.len(),
                actual: runs.len(),
            });
        }
    }
    if base.len() < MIN_RUNS {
        return Err(StatsError::TooFewRuns(base.len()));
    }
    let baseline_median = median(base).expect("non-empty");
    Ok(table
        .iter()
        .filter(|(name, _)| name != baseline)
        .map(|(name, runs)| {
            let other_median = median(runs).expect("non-empty");
            let test = wilcoxon_signed_rank(base, runs, Sidedness::TwoSided);
            let better = if metric.lower_is_better() {
                baseline_median < other_median
            } else {
                baseline_median > other_median
            };
            let defeated = matches!(&test, Ok(t) if t.p_value.as_f64() < ALPHA) && better;
            Comparison {
                algorithm: name.clone(),
                metric,
                test,
                baseline_median,
                other_median,
                defeated,
            }
        })
        .collect())
}

//! Palette learning: K-Means and fuzzy C-Means, each with uniform or
//! D²-weighted seeding.
//!
//! All four algorithms run over a [`PointSet`], a flat weighted point list.
//! The reference path gives every pixel weight 1; with
//! [`ClusterConfig::dedup_colors`] identical colors are merged into one
//! weighted point, which yields the same centroids from the same
//! initialization at a fraction of the cost.

mod fcm;
mod kmeans;
mod points;
mod seeding;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::raster::PixelPoint;
use crate::scalar::Scalar;

pub use fcm::{fcm_memberships, fcm_run, MembershipMatrix};
pub use kmeans::kmeans_run;
pub use points::PointSet;
pub use seeding::{seed_kmeanspp, seed_random};

pub const DEFAULT_FUZZIFIER: f64 = 2.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no points to cluster")]
    NoPoints,
    #[error("only {distinct} distinct point(s) available for K = {k}")]
    Degenerate { distinct: usize, k: usize },
    #[error("point {index} has dimension {actual}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("initial centroids {first} and {second} coincide")]
    DuplicateCentroids { first: usize, second: usize },
    #[error("coordinate {0} outside [0, 255]")]
    CoordinateOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KMeans,
    KMeansPlusPlus,
    FuzzyCMeans,
    FuzzyCMeansPlusPlus,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::KMeans,
        Algorithm::KMeansPlusPlus,
        Algorithm::FuzzyCMeans,
        Algorithm::FuzzyCMeansPlusPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::KMeansPlusPlus => "kmeanspp",
            Algorithm::FuzzyCMeans => "fcm",
            Algorithm::FuzzyCMeansPlusPlus => "fcmpp",
        }
    }

    /// Container tag byte.
    pub fn tag(self) -> u8 {
        match self {
            Algorithm::KMeans => 0,
            Algorithm::KMeansPlusPlus => 1,
            Algorithm::FuzzyCMeans => 2,
            Algorithm::FuzzyCMeansPlusPlus => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn uses_d2_seeding(self) -> bool {
        matches!(self, Algorithm::KMeansPlusPlus | Algorithm::FuzzyCMeansPlusPlus)
    }

    pub fn is_fuzzy(self) -> bool {
        matches!(self, Algorithm::FuzzyCMeans | Algorithm::FuzzyCMeansPlusPlus)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            "kmeanspp" | "kmeans++" | "k-means++" => Ok(Algorithm::KMeansPlusPlus),
            "fcm" | "fuzzy-cmeans" => Ok(Algorithm::FuzzyCMeans),
            "fcmpp" | "fcm++" | "fuzzy-cmeans++" => Ok(Algorithm::FuzzyCMeansPlusPlus),
            other => Err(ClusterError::InvalidConfig(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig<F = f64> {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Fuzzifier `m`; only read by the fuzzy algorithms.
    pub fuzzifier: F,
    /// Stop once no centroid moves by this much (Euclidean) in one iteration.
    pub tolerance: F,
    pub max_iterations: usize,
    pub seed: u64,
    /// Independent runs; the lowest objective wins.
    pub restarts: usize,
    /// Cluster unique colors weighted by multiplicity instead of every pixel.
    pub dedup_colors: bool,
}

impl<F: Scalar> ClusterConfig<F> {
    pub fn new(algorithm: Algorithm, k: usize) -> Self {
        Self {
            algorithm,
            k,
            fuzzifier: F::lit(DEFAULT_FUZZIFIER),
            tolerance: F::lit(DEFAULT_TOLERANCE),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            restarts: 1,
            dedup_colors: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_fuzzifier(mut self, m: F) -> Self {
        self.fuzzifier = m;
        self
    }

    pub fn with_tolerance(mut self, tolerance: F) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_dedup_colors(mut self, dedup: bool) -> Self {
        self.dedup_colors = dedup;
        self
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        let invalid = |msg: String| Err(ClusterError::InvalidConfig(msg));
        if self.k == 0 {
            return invalid("K must be at least 1".into());
        }
        if !(self.fuzzifier > F::one()) {
            return invalid(format!("fuzzifier must exceed 1, got {}", self.fuzzifier));
        }
        if !(self.tolerance > F::zero()) {
            return invalid(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1".into());
        }
        if self.restarts == 0 {
            return invalid("restarts must be at least 1".into());
        }
        Ok(())
    }
}

/// K real-valued cluster centers of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids<F> {
    dim: usize,
    coords: Vec<F>,
}

impl<F: Scalar> Centroids<F> {
    /// Every coordinate must be finite and inside `[0, 255]`.
    pub fn new(points: Vec<PixelPoint<F>>) -> Result<Self, ClusterError> {
        let dim = points.first().ok_or(ClusterError::NoPoints)?.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(ClusterError::DimensionMismatch {
                    index,
                    expected: dim,
                    actual: p.dim(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        Self::from_flat(dim, coords)
    }

    pub(crate) fn from_flat(dim: usize, coords: Vec<F>) -> Result<Self, ClusterError> {
        if dim == 0 || coords.is_empty() {
            return Err(ClusterError::NoPoints);
        }
        let upper = F::lit(255.0);
        if let Some(&bad) = coords
            .iter()
            .find(|&&c| !c.is_finite() || c < F::zero() || c > upper)
        {
            return Err(ClusterError::CoordinateOutOfRange(bad.as_f64()));
        }
        Ok(Self { dim, coords })
    }

    pub fn k(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, index: usize) -> &[F] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[F]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<PixelPoint<F>> {
        self.iter().map(|c| PixelPoint::new(c.to_vec())).collect()
    }

    pub(crate) fn flat(&self) -> &[F] {
        &self.coords
    }

    /// Index of the nearest centroid (lowest index on ties) and its squared distance.
    pub fn nearest(&self, point: &[F]) -> (usize, F) {
        nearest(&self.coords, self.dim, point)
    }

    pub(crate) fn first_duplicate(&self) -> Option<(usize, usize)> {
        let k = self.k();
        (0..k).find_map(|i| {
            (i + 1..k)
                .find(|&j| self.centroid(i) == self.centroid(j))
                .map(|j| (i, j))
        })
    }
}

#[inline]
pub(crate) fn nearest<F: Scalar>(centroids: &[F], dim: usize, point: &[F]) -> (usize, F) {
    let mut best = 0;
    let mut best_d2 = F::infinity();
    for (index, c) in centroids.chunks_exact(dim).enumerate() {
        let d2 = crate::raster::squared_distance(c, point);
        if d2 < best_d2 {
            best = index;
            best_d2 = d2;
        }
    }
    (best, best_d2)
}

/// Result of one clustering run (or the best of several restarts).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome<F> {
    pub centroids: Centroids<F>,
    /// One hard label per input point.
    pub assignments: Vec<usize>,
    /// SSE for K-Means, J_m for fuzzy C-Means, at the final centroids.
    pub objective: F,
    /// Objective evaluated after every assignment (membership) step,
    /// ending with the final evaluation.
    pub objective_trace: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest |row sum - 1| over every membership matrix computed; fuzzy only.
    pub membership_row_error: Option<F>,
    /// Which restart produced this outcome.
    pub restart: usize,
}

/// RNG for restart `restart` of a run seeded with `seed`. Restart 0 is the
/// plain seeded stream so a single run and the first of many coincide.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Seeds and runs the configured algorithm, keeping the best of
/// `config.restarts` independent runs.
pub fn run_clustering<F: Scalar>(
    points: &[PixelPoint<F>],
    config: &ClusterConfig<F>,
) -> Result<ClusterOutcome<F>, ClusterError> {
    config.validate()?;
    let set = if config.dedup_colors {
        PointSet::unique_weighted(points)?
    } else {
        PointSet::from_points(points)?
    };
    let outcome = run_on_set(&set, config)?;
    Ok(set.expand_outcome(outcome))
}

pub(crate) fn run_on_set<F: Scalar>(
    set: &PointSet<F>,
    config: &ClusterConfig<F>,
) -> Result<ClusterOutcome<F>, ClusterError> {
    config.validate()?;
    let distinct = set.distinct_count();
    if distinct < config.k {
        return Err(ClusterError::Degenerate {
            distinct,
            k: config.k,
        });
    }
    let mut best: Option<ClusterOutcome<F>> = None;
    for restart in 0..config.restarts {
        let mut rng = restart_rng(config.seed, restart);
        let init = if config.algorithm.uses_d2_seeding() {
            seeding::seed_d2_set(set, config.k, &mut rng)?
        } else {
            seeding::seed_uniform_set(set, config.k, &mut rng)?
        };
        let mut outcome = if config.algorithm.is_fuzzy() {
            fcm::fcm_on_set(set, init, config)
        } else {
            kmeans::lloyd_on_set(set, init, config)
        };
        outcome.restart = restart;
        if best
            .as_ref()
            .is_none_or(|b| outcome.objective < b.objective)
        {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub(crate) fn check_init<F: Scalar>(
    set: &PointSet<F>,
    init: &Centroids<F>,
) -> Result<(), ClusterError> {
    if init.dim() != set.dim() {
        return Err(ClusterError::DimensionMismatch {
            index: 0,
            expected: set.dim(),
            actual: init.dim(),
        });
    }
    if let Some((first, second)) = init.first_duplicate() {
        return Err(ClusterError::DuplicateCentroids { first, second });
    }
    Ok(())
}

/// Largest centroid displacement, Euclidean per centroid.
pub(crate) fn max_shift<F: Scalar>(old: &[F], new: &[F], dim: usize) -> F {
    old.chunks_exact(dim)
        .zip(new.chunks_exact(dim))
        .map(|(a, b)| crate::raster::squared_distance(a, b).sqrt())
        .fold(F::zero(), F::max)
}

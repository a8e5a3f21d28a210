use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{Centroids, ClusterError, PointSet};
use crate::raster::{squared_distance, PixelPoint};
use crate::scalar::Scalar;

/// K distinct data points drawn uniformly without replacement.
pub fn seed_random<F: Scalar, R: Rng + ?Sized>(
    points: &[PixelPoint<F>],
    k: usize,
    rng: &mut R,
) -> Result<Centroids<F>, ClusterError> {
    seed_uniform_set(&PointSet::from_points(points)?, k, rng)
}

/// K-Means++ seeding: the first center uniform over the data, each further
/// center drawn with probability proportional to D(x)², the squared
/// distance from x to the nearest center chosen so far.
pub fn seed_kmeanspp<F: Scalar, R: Rng + ?Sized>(
    points: &[PixelPoint<F>],
    k: usize,
    rng: &mut R,
) -> Result<Centroids<F>, ClusterError> {
    seed_d2_set(&PointSet::from_points(points)?, k, rng)
}

fn check_k<F: Scalar>(set: &PointSet<F>, k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidConfig("K must be at least 1".into()));
    }
    if set.distinct_count() < k {
        return Err(ClusterError::Degenerate {
            distinct: set.distinct_count(),
            k,
        });
    }
    Ok(())
}

fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    WeightedIndex::new(weights).ok().map(|d| d.sample(rng))
}

pub(crate) fn seed_uniform_set<F: Scalar, R: Rng + ?Sized>(
    set: &PointSet<F>,
    k: usize,
    rng: &mut R,
) -> Result<Centroids<F>, ClusterError> {
    check_k(set, k)?;
    let mut weights: Vec<f64> = set.weights().iter().map(|w| w.as_f64()).collect();
    let mut coords = Vec::with_capacity(k * set.dim());
    for _ in 0..k {
        let pick = draw(&weights, rng).ok_or(ClusterError::Degenerate {
            distinct: set.distinct_count(),
            k,
        })?;
        let chosen = set.point(pick);
        coords.extend_from_slice(chosen);
        // Exclude every copy of the chosen value from later draws.
        for (i, w) in weights.iter_mut().enumerate() {
            if *w > 0.0 && set.point(i) == chosen {
                *w = 0.0;
            }
        }
    }
    Centroids::from_flat(set.dim(), coords)
}

pub(crate) fn seed_d2_set<F: Scalar, R: Rng + ?Sized>(
    set: &PointSet<F>,
    k: usize,
    rng: &mut R,
) -> Result<Centroids<F>, ClusterError> {
    check_k(set, k)?;
    let dim = set.dim();
    let base: Vec<f64> = set.weights().iter().map(|w| w.as_f64()).collect();
    let first = draw(&base, rng).ok_or(ClusterError::NoPoints)?;
    let mut coords = set.point(first).to_vec();

    let mut min_d2: Vec<F> = (0..set.len())
        .map(|i| squared_distance(set.point(i), &coords))
        .collect();
    while coords.len() < k * dim {
        let weights: Vec<f64> = min_d2
            .iter()
            .zip(&base)
            .map(|(d2, w)| d2.as_f64() * w)
            .collect();
        let pick = draw(&weights, rng).ok_or(ClusterError::Degenerate {
            distinct: set.distinct_count(),
            k,
        })?;
        let chosen = set.point(pick).to_vec();
        for (i, d2) in min_d2.iter_mut().enumerate() {
            let d = squared_distance(set.point(i), &chosen);
            if d < *d2 {
                *d2 = d;
            }
        }
        coords.extend_from_slice(&chosen);
    }
    Centroids::from_flat(dim, coords)
}

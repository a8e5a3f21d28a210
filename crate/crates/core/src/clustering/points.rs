use std::collections::HashMap;

use super::{ClusterError, ClusterOutcome};
use crate::raster::PixelPoint;
use crate::scalar::Scalar;

/// Flat, weighted point list the clustering loops operate on.
#[derive(Debug, Clone)]
pub struct PointSet<F> {
    dim: usize,
    coords: Vec<F>,
    weights: Vec<F>,
    distinct: usize,
    /// Original point index -> set index, when points were merged.
    inverse: Option<Vec<usize>>,
}

fn key<F: Scalar>(coords: &[F]) -> Vec<u64> {
    coords.iter().map(|c| c.as_f64().to_bits()).collect()
}

fn flatten<F: Scalar>(points: &[PixelPoint<F>]) -> Result<(usize, Vec<F>), ClusterError> {
    let dim = points.first().ok_or(ClusterError::NoPoints)?.dim();
    if dim == 0 {
        return Err(ClusterError::NoPoints);
    }
    let upper = F::lit(255.0);
    let mut coords = Vec::with_capacity(points.len() * dim);
    for (index, p) in points.iter().enumerate() {
        if p.dim() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                actual: p.dim(),
            });
        }
        if let Some(&bad) = p
            .coords()
            .iter()
            .find(|&&c| !c.is_finite() || c < F::zero() || c > upper)
        {
            return Err(ClusterError::CoordinateOutOfRange(bad.as_f64()));
        }
        coords.extend_from_slice(p.coords());
    }
    Ok((dim, coords))
}

impl<F: Scalar> PointSet<F> {
    /// Every point with weight 1, duplicates kept.
    pub fn from_points(points: &[PixelPoint<F>]) -> Result<Self, ClusterError> {
        let (dim, coords) = flatten(points)?;
        let mut keys: Vec<Vec<u64>> = coords.chunks_exact(dim).map(key).collect();
        keys.sort_unstable();
        keys.dedup();
        Ok(Self {
            dim,
            weights: vec![F::one(); points.len()],
            coords,
            distinct: keys.len(),
            inverse: None,
        })
    }

    /// Identical points merged into one, weighted by multiplicity, in order
    /// of first occurrence.
    pub fn unique_weighted(points: &[PixelPoint<F>]) -> Result<Self, ClusterError> {
        let (dim, all) = flatten(points)?;
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut weights: Vec<F> = Vec::new();
        let mut inverse = Vec::with_capacity(points.len());
        for p in all.chunks_exact(dim) {
            let slot = *index.entry(key(p)).or_insert_with(|| {
                coords.extend_from_slice(p);
                weights.push(F::zero());
                weights.len() - 1
            });
            weights[slot] += F::one();
            inverse.push(slot);
        }
        Ok(Self {
            dim,
            distinct: weights.len(),
            coords,
            weights,
            inverse: Some(inverse),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn distinct_count(&self) -> usize {
        self.distinct
    }

    pub fn point(&self, index: usize) -> &[F] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn weight(&self, index: usize) -> F {
        self.weights[index]
    }

    pub(crate) fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[F], F)> {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// Maps per-set assignments back to one label per original point.
    pub(crate) fn expand_outcome(&self, mut outcome: ClusterOutcome<F>) -> ClusterOutcome<F> {
        if let Some(inverse) = &self.inverse {
            outcome.assignments = inverse.iter().map(|&i| outcome.assignments[i]).collect();
        }
        outcome
    }
}

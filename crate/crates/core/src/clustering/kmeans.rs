use super::{check_init, max_shift, nearest, Centroids, ClusterConfig, ClusterError, ClusterOutcome, PointSet};
use crate::raster::{squared_distance, PixelPoint};
use crate::scalar::Scalar;

/// Lloyd iterations from the given initial centroids.
pub fn kmeans_run<F: Scalar>(
    points: &[PixelPoint<F>],
    init: &Centroids<F>,
    config: &ClusterConfig<F>,
) -> Result<ClusterOutcome<F>, ClusterError> {
    config.validate()?;
    let set = if config.dedup_colors {
        PointSet::unique_weighted(points)?
    } else {
        PointSet::from_points(points)?
    };
    check_init(&set, init)?;
    Ok(set.expand_outcome(lloyd_on_set(&set, init.clone(), config)))
}

/// Nearest-centroid labels and the weighted SSE they induce.
fn assign<F: Scalar>(set: &PointSet<F>, centroids: &[F], labels: &mut [usize]) -> F {
    let dim = set.dim();
    let mut sse = F::zero();
    for ((p, w), label) in set.iter().zip(labels.iter_mut()) {
        let (best, d2) = nearest(centroids, dim, p);
        *label = best;
        sse += w * d2;
    }
    sse
}

pub(crate) fn lloyd_on_set<F: Scalar>(
    set: &PointSet<F>,
    init: Centroids<F>,
    config: &ClusterConfig<F>,
) -> ClusterOutcome<F> {
    let dim = set.dim();
    let k = init.k();
    let mut centroids = init.flat().to_vec();
    let mut labels = vec![0usize; set.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let mut sums = vec![F::zero(); k * dim];
    let mut mass = vec![F::zero(); k];
    while iterations < config.max_iterations {
        iterations += 1;
        trace.push(assign(set, &centroids, &mut labels));

        sums.iter_mut().for_each(|s| *s = F::zero());
        mass.iter_mut().for_each(|m| *m = F::zero());
        for ((p, w), &label) in set.iter().zip(&labels) {
            mass[label] += w;
            for (s, &x) in sums[label * dim..(label + 1) * dim].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        let mut updated = centroids.clone();
        for c in 0..k {
            if mass[c] > F::zero() {
                for d in 0..dim {
                    updated[c * dim + d] = sums[c * dim + d] / mass[c];
                }
            }
        }
        repair_empty(set, &labels, &mass, &mut updated, dim);

        let shift = max_shift(&centroids, &updated, dim);
        centroids = updated;
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }

    let objective = assign(set, &centroids, &mut labels);
    trace.push(objective);
    ClusterOutcome {
        centroids: Centroids::from_flat(dim, centroids).expect("means stay inside the data hull"),
        assignments: labels,
        objective,
        objective_trace: trace,
        iterations,
        converged,
        membership_row_error: None,
        restart: 0,
    }
}

/// Moves each empty cluster's centroid onto the point farthest from its own
/// (updated) centroid. Each repair consumes a distinct point.
fn repair_empty<F: Scalar>(
    set: &PointSet<F>,
    labels: &[usize],
    mass: &[F],
    centroids: &mut [F],
    dim: usize,
) {
    let empties: Vec<usize> = (0..mass.len()).filter(|&c| mass[c] <= F::zero()).collect();
    if empties.is_empty() {
        return;
    }
    let mut used = vec![false; set.len()];
    for empty in empties {
        let mut best: Option<(usize, F)> = None;
        for (i, &label) in labels.iter().enumerate() {
            if used[i] {
                continue;
            }
            let p = set.point(i);
            let d2 = squared_distance(p, &centroids[label * dim..(label + 1) * dim]);
            if d2 > F::zero() && best.is_none_or(|(_, b)| d2 > b) {
                best = Some((i, d2));
            }
        }
        let Some((i, _)) = best else { return };
        used[i] = true;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(set.point(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Algorithm;

    fn pts(values: &[f64]) -> Vec<PixelPoint<f64>> {
        values.iter().map(|&v| PixelPoint::new(vec![v])).collect()
    }

    fn config() -> ClusterConfig<f64> {
        ClusterConfig::new(Algorithm::KMeans, 2)
    }

    #[test]
    fn k_distinct_values_converge_in_one_iteration() {
        let data = pts(&[5.0, 5.0, 80.0, 80.0, 80.0, 200.0]);
        let init = Centroids::new(pts(&[80.0, 200.0, 5.0])).unwrap();
        let out = kmeans_run(&data, &init, &config()).unwrap();
        assert_eq!(out.objective, 0.0);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert_eq!(out.assignments, vec![2, 2, 0, 0, 0, 1]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let data = pts(&[1.0, 2.0, 3.0, 10.0]);
        let init = Centroids::new(pts(&[3.0])).unwrap();
        let out = kmeans_run(&data, &init, &config()).unwrap();
        assert!((out.centroids.centroid(0)[0] - 4.0).abs() < 1e-12);
        // 9 + 4 + 1 + 36
        assert!((out.objective - 50.0).abs() < 1e-9);
    }

    #[test]
    fn two_pairs_example() {
        // Brute force over the 7 two-partitions of {0,1,9,10} gives
        // {0,1}|{9,10} with SSE 0.25·4 = 1.0 as the unique optimum.
        let data = pts(&[0.0, 1.0, 9.0, 10.0]);
        let init = Centroids::new(pts(&[0.0, 1.0])).unwrap();
        let out = kmeans_run(&data, &init, &config()).unwrap();
        let mut c: Vec<f64> = out.centroids.iter().map(|p| p[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 9.5]);
        assert!((out.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Centroid at 255 attracts nobody on the first pass.
        let data = pts(&[0.0, 1.0, 2.0, 50.0, 51.0]);
        let init = Centroids::new(pts(&[1.0, 40.0, 255.0])).unwrap();
        let out = kmeans_run(&data, &init, &config()).unwrap();
        assert_eq!(out.centroids.k(), 3);
        let mut used = out.assignments.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 3, "all three clusters populated");
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn rejects_duplicate_init() {
        let data = pts(&[0.0, 1.0]);
        let init = Centroids::new(pts(&[1.0, 1.0])).unwrap();
        assert_eq!(
            kmeans_run(&data, &init, &config()),
            Err(ClusterError::DuplicateCentroids {
                first: 0,
                second: 1
            })
        );
    }

    #[test]
    fn generic_over_f32() {
        let data: Vec<PixelPoint<f32>> = [0.0f32, 1.0, 9.0, 10.0]
            .iter()
            .map(|&v| PixelPoint::new(vec![v]))
            .collect();
        let init = Centroids::new(vec![PixelPoint::new(vec![0.0f32]), PixelPoint::new(vec![10.0])])
            .unwrap();
        let out = kmeans_run(&data, &init, &ClusterConfig::new(Algorithm::KMeans, 2)).unwrap();
        assert!((out.objective - 1.0).abs() < 1e-5);
    }
}

use super::{check_init, max_shift, Centroids, ClusterConfig, ClusterError, ClusterOutcome, PointSet};
use crate::raster::{squared_distance, PixelPoint};
use crate::scalar::Scalar;

/// n × K fuzzy membership degrees, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix<F> {
    k: usize,
    degrees: Vec<F>,
}

impl<F: Scalar> MembershipMatrix<F> {
    pub fn rows(&self) -> usize {
        self.degrees.len() / self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.degrees[i * self.k..(i + 1) * self.k]
    }

    /// Largest |Σ_k u_ik − 1| over all rows.
    pub fn max_row_error(&self) -> F {
        self.degrees
            .chunks_exact(self.k)
            .map(|row| (row.iter().copied().sum::<F>() - F::one()).abs())
            .fold(F::zero(), F::max)
    }

    /// Column of the largest degree in each row, lowest index on ties.
    pub fn argmax(&self) -> Vec<usize> {
        self.degrees
            .chunks_exact(self.k)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, F::neg_infinity()), |(bi, bu), (i, &u)| {
                        if u > bu {
                            (i, u)
                        } else {
                            (bi, bu)
                        }
                    })
                    .0
            })
            .collect()
    }
}

/// Membership degrees of `points` with respect to `centroids` under fuzzifier `m`.
pub fn fcm_memberships<F: Scalar>(
    points: &[PixelPoint<F>],
    centroids: &Centroids<F>,
    m: F,
) -> Result<MembershipMatrix<F>, ClusterError> {
    if !(m > F::one()) {
        return Err(ClusterError::InvalidConfig(format!(
            "fuzzifier must exceed 1, got {m}"
        )));
    }
    let set = PointSet::from_points(points)?;
    check_init(&set, centroids)?;
    let mut degrees = vec![F::zero(); set.len() * centroids.k()];
    sweep(&set, centroids.flat(), m, &mut degrees);
    Ok(MembershipMatrix {
        k: centroids.k(),
        degrees,
    })
}

/// Running sums of one pass over the points.
struct Sweep<F> {
    objective: F,
    row_error: F,
    sums: Vec<F>,
    mass: Vec<F>,
}

/// One pass over the points: memberships u_ik = 1 / Σ_j (d_ik / d_ij)^(2/(m−1))
/// into `degrees`, J_m under the current centroids, the worst row-sum error,
/// and the weighted Σ u^m x and Σ u^m needed for the next centroids. A point
/// sitting on a centroid belongs to it entirely (the lowest such index).
fn sweep<F: Scalar>(set: &PointSet<F>, centroids: &[F], m: F, degrees: &mut [F]) -> Sweep<F> {
    let dim = set.dim();
    let k = centroids.len() / dim;
    // Ratios of squared distances, so the exponent is 1/(m−1).
    let exponent = F::one() / (m - F::one());
    let unit_exponent = exponent == F::one();
    let square = m == F::lit(2.0);
    let mut out = Sweep {
        objective: F::zero(),
        row_error: F::zero(),
        sums: vec![F::zero(); k * dim],
        mass: vec![F::zero(); k],
    };
    let mut d2 = vec![F::zero(); k];
    for (i, (p, w)) in set.iter().enumerate() {
        let row = &mut degrees[i * k..(i + 1) * k];
        for (c, d) in d2.iter_mut().enumerate() {
            *d = squared_distance(p, &centroids[c * dim..(c + 1) * dim]);
        }
        if let Some(hit) = d2.iter().position(|&d| d == F::zero()) {
            row.iter_mut().for_each(|u| *u = F::zero());
            row[hit] = F::one();
        } else {
            let mut total = F::zero();
            if unit_exponent {
                for (u, &d) in row.iter_mut().zip(&d2) {
                    *u = d.recip();
                    total += *u;
                }
            } else {
                let closest = d2.iter().copied().fold(F::infinity(), F::min);
                for (u, &d) in row.iter_mut().zip(&d2) {
                    *u = (closest / d).powf(exponent);
                    total += *u;
                }
            }
            let scale = total.recip();
            row.iter_mut().for_each(|u| *u *= scale);
        }

        let mut row_sum = F::zero();
        let mut acc = F::zero();
        for c in 0..k {
            let u = row[c];
            row_sum += u;
            if u == F::zero() {
                continue;
            }
            let um = pow_m(u, m, square);
            acc += um * d2[c];
            let wum = w * um;
            out.mass[c] += wum;
            for (s, &x) in out.sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += wum * x;
            }
        }
        out.objective += w * acc;
        out.row_error = out.row_error.max((row_sum - F::one()).abs());
    }
    out
}

#[inline]
fn pow_m<F: Scalar>(u: F, m: F, square: bool) -> F {
    if square {
        u * u
    } else {
        u.powf(m)
    }
}

/// Alternating membership / centroid updates from the given initial centroids.
pub fn fcm_run<F: Scalar>(
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
    Ok(set.expand_outcome(fcm_on_set(&set, init.clone(), config)))
}

pub(crate) fn fcm_on_set<F: Scalar>(
    set: &PointSet<F>,
    init: Centroids<F>,
    config: &ClusterConfig<F>,
) -> ClusterOutcome<F> {
    let dim = set.dim();
    let k = init.k();
    let m = config.fuzzifier;
    let mut centroids = init.flat().to_vec();
    let mut degrees = vec![F::zero(); set.len() * k];
    let mut trace = Vec::new();
    let mut row_error = F::zero();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        iterations += 1;
        let pass = sweep(set, &centroids, m, &mut degrees);
        row_error = row_error.max(pass.row_error);
        trace.push(pass.objective);

        let mut updated = centroids.clone();
        for c in 0..k {
            if pass.mass[c] > F::zero() {
                for d in 0..dim {
                    updated[c * dim + d] = pass.sums[c * dim + d] / pass.mass[c];
                }
            }
        }
        let shift = max_shift(&centroids, &updated, dim);
        centroids = updated;
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }

    let last = sweep(set, &centroids, m, &mut degrees);
    row_error = row_error.max(last.row_error);
    trace.push(last.objective);
    let matrix = MembershipMatrix { k, degrees };
    ClusterOutcome {
        centroids: Centroids::from_flat(dim, centroids).expect("weighted means stay inside the data hull"),
        assignments: matrix.argmax(),
        objective: last.objective,
        objective_trace: trace,
        iterations,
        converged,
        membership_row_error: Some(row_error),
        restart: 0,
    }
}

use nalgebra::{DMatrix, SVD};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::solver::singular_values;
use crate::error::{Error, Result};

/// Structural constants of a clustered reward matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `(M / C) max_i ||U_i||^2` for the top-`C` left singular vectors.
    pub mu_row: f64,
    /// `(N / C) max_j ||V_j||^2` for the top-`C` right singular vectors.
    pub mu_col: f64,
    /// Ratio of largest to `C`-th singular value of the distinct rows;
    /// infinite when those rows are rank deficient.
    pub kappa: f64,
    pub rank_deficient: bool,
    /// Largest over smallest cluster size.
    pub tau: f64,
    pub singular_values: Vec<f64>,
    /// Smallest `C`-th singular value of the distinct rows restricted to a
    /// random item subset, over the sampled subsets. Spot check only.
    pub subset_min_singular: Option<f64>,
}

impl Diagnostics {
    pub fn mu(&self) -> f64 {
        self.mu_row.max(self.mu_col)
    }
}

/// Representative row of each cluster, stacked as a `C x N` matrix.
pub fn distinct_rows(
    p: &DMatrix<f64>,
    cluster_of: &[usize],
    clusters: usize,
) -> Result<DMatrix<f64>> {
    if cluster_of.len() != p.nrows() {
        return Err(Error::config(
            "cluster_of length differs from the row count",
        ));
    }
    let mut rep = vec![usize::MAX; clusters];
    for (u, &c) in cluster_of.iter().enumerate() {
        if c >= clusters {
            return Err(Error::config(format!("cluster id {c} out of range")));
        }
        if rep[c] == usize::MAX {
            rep[c] = u;
        }
    }
    if rep.contains(&usize::MAX) {
        return Err(Error::config("some cluster has no users"));
    }
    Ok(DMatrix::from_fn(clusters, p.ncols(), |c, j| p[(rep[c], j)]))
}

fn coherence(factor: &DMatrix<f64>, rank: usize) -> f64 {
    let n = factor.nrows();
    let r = rank.min(factor.ncols());
    let max_norm = (0..n)
        .map(|i| (0..r).map(|k| factor[(i, k)].powi(2)).sum::<f64>())
        .fold(0.0, f64::max);
    n as f64 / rank as f64 * max_norm
}

/// Incoherence, condition number and cluster imbalance of `p`.
pub fn diagnostics(p: &DMatrix<f64>, cluster_of: &[usize], clusters: usize) -> Result<Diagnostics> {
    let x = distinct_rows(p, cluster_of, clusters)?;
    let mut svals = singular_values(&x);
    svals.sort_by(|a, b| b.total_cmp(a));
    let top = svals.first().copied().unwrap_or(0.0);
    let c_th = svals.get(clusters - 1).copied().unwrap_or(0.0);
    let rank_deficient = !(c_th > 1e-10 * top.max(1e-300));
    let kappa = if rank_deficient {
        f64::INFINITY
    } else {
        top / c_th
    };

    let svd = SVD::try_new_unordered(p.clone(), true, true, f64::EPSILON, 10_000)
        .filter(|svd| svd.singular_values.iter().all(|s| s.is_finite()))
        .ok_or_else(|| Error::config("singular value decomposition of P failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let keep: Vec<usize> = order.into_iter().take(clusters).collect();
    let u_top = DMatrix::from_fn(p.nrows(), keep.len(), |i, k| u[(i, keep[k])]);
    let v_top = DMatrix::from_fn(p.ncols(), keep.len(), |j, k| vt[(keep[k], j)]);

    let mut sizes = vec![0usize; clusters];
    for &c in cluster_of {
        sizes[c] += 1;
    }
    let tau = *sizes.iter().max().unwrap() as f64 / *sizes.iter().min().unwrap() as f64;

    Ok(Diagnostics {
        mu_row: coherence(&u_top, clusters),
        mu_col: coherence(&v_top, clusters),
        kappa,
        rank_deficient,
        tau,
        singular_values: svals,
        subset_min_singular: None,
    })
}

/// Samples `samples` random item subsets of size `ceil(gamma * C)` and
/// returns the smallest `C`-th singular value of the distinct rows restricted
/// to them.
pub fn subset_spot_check<R: Rng + ?Sized>(
    p: &DMatrix<f64>,
    cluster_of: &[usize],
    clusters: usize,
    gamma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let x = distinct_rows(p, cluster_of, clusters)?;
    let n = x.ncols();
    let size = ((gamma * clusters as f64).ceil() as usize).clamp(clusters.min(n), n);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let cols = sample(rng, n, size).into_vec();
        let sub = DMatrix::from_fn(clusters, cols.len(), |c, k| x[(c, cols[k])]);
        let sv = singular_values(&sub);
        let smallest = if sv.len() < clusters {
            0.0
        } else {
            let mut v: Vec<f64> = sv.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v[clusters - 1]
        };
        worst = worst.min(smallest);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_matrix_has_unit_condition_number() {
        let p = DMatrix::from_element(6, 5, 0.7);
        let d = diagnostics(&p, &[0; 6], 1).unwrap();
        assert!((d.kappa - 1.0).abs() < 1e-12);
        assert!((d.mu_row - 1.0).abs() < 1e-9);
        assert!((d.mu_col - 1.0).abs() < 1e-9);
        assert_eq!(d.tau, 1.0);
    }

    #[test]
    fn spike_column_is_maximally_coherent() {
        let mut p = DMatrix::zeros(4, 8);
        for i in 0..4 {
            p[(i, 3)] = 2.0;
        }
        let d = diagnostics(&p, &[0; 4], 1).unwrap();
        assert!((d.mu_col - 8.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_cluster_rows_are_flagged() {
        let p = DMatrix::from_element(4, 3, 1.0);
        let d = diagnostics(&p, &[0, 1, 0, 1], 2).unwrap();
        assert!(d.rank_deficient);
        assert!(d.kappa.is_infinite());
    }

    #[test]
    fn orthogonal_rows_are_well_conditioned() {
        // two clusters with orthogonal, equal-norm rows
        let p = DMatrix::from_fn(4, 4, |i, j| if (i % 2) == (j % 2) { 1.0 } else { 0.0 });
        let d = diagnostics(&p, &[0, 1, 0, 1], 2).unwrap();
        assert!((d.kappa - 1.0).abs() < 1e-9);
        assert!((d.tau - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = subset_spot_check(&p, &[0, 1, 0, 1], 2, 2.0, 20, &mut rng).unwrap();
        assert!(s >= 0.0);
    }
}

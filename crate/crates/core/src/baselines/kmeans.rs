use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub restarts: usize,
    /// Stop adding clusters once one more reduces the SSE by less than this
    /// fraction of the single-cluster SSE.
    pub elbow_threshold: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iters: 100,
            restarts: 5,
            elbow_threshold: 0.1,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::config(
                "k-means needs at least one iteration and one restart",
            ));
        }
        if !(0.0..1.0).contains(&self.elbow_threshold) {
            return Err(Error::config("elbow_threshold must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after each Lloyd iteration of the kept restart.
    pub history: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Farthest-point seeding from `first`.
fn farthest_point_init(points: &[Vec<f64>], k: usize, first: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![points[first].clone()];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let (idx, _) =
            d.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d[i] = d[i].min(dist2(p, centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iters: usize) -> KMeansFit {
    let dim = points[0].len();
    let k = centers.len();
    let mut labels = vec![0; points.len()];
    let mut history = Vec::new();
    let mut sse = f64::INFINITY;
    for _ in 0..max_iters {
        let mut new_sse = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            labels[i] = c;
            new_sse += d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let after: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &c)| dist2(p, &centers[c]))
            .sum();
        history.push(after);
        let done = new_sse - after <= 1e-12 * new_sse.max(1.0) && new_sse <= sse;
        sse = after;
        if done {
            break;
        }
    }
    KMeansFit {
        labels,
        centers,
        sse,
        history,
    }
}

/// Lloyd's algorithm on the rows of `data` with `restarts` farthest-point
/// seedings (the first center drawn at random); keeps the lowest SSE.
pub fn kmeans<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k: usize,
    cfg: &KMeansConfig,
    rng: &mut R,
) -> Result<KMeansFit> {
    cfg.validate()?;
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::config(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| data.row(i).iter().copied().collect())
        .collect();
    let mut best: Option<KMeansFit> = None;
    for _ in 0..cfg.restarts {
        let first = rng.gen_range(0..n);
        let fit = lloyd(
            &points,
            farthest_point_init(&points, k, first),
            cfg.max_iters,
        );
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Fits `k = 1..=k_max` and returns the fit at the elbow: the last `k`
/// before adding a cluster reduces the SSE by less than `elbow_threshold`
/// times the total (`k = 1`) SSE.
pub fn elbow<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k_max: usize,
    cfg: &KMeansConfig,
    rng: &mut R,
) -> Result<KMeansFit> {
    let k_max = k_max.clamp(1, data.nrows().max(1));
    let mut prev = kmeans(data, 1, cfg, rng)?;
    let total = prev.sse;
    for k in 2..=k_max {
        if prev.sse <= 0.0 {
            break;
        }
        let fit = kmeans(data, k, cfg, rng)?;
        if prev.sse - fit.sse < cfg.elbow_threshold * total {
            break;
        }
        prev = fit;
    }
    Ok(prev)
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sweep::{CellResult, SweepSpec};
use crate::error::Result;

/// Mean, standard error, min and max of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single value.
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Option<Stats> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats {
            n,
            mean,
            stderr,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Aggregate of one (dataset, algorithm) cell over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub algorithm: String,
    pub horizon: usize,
    pub failed: usize,
    /// Final cumulative regret; absent when every seed failed.
    pub regret: Option<Stats>,
    pub mean_cumulative_regret: Vec<f64>,
    pub mean_roundwise_reward: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    pub error: String,
}

/// JSON summary of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<Failure>,
}

impl SweepReport {
    pub fn new(spec: &SweepSpec, results: &[CellResult]) -> Self {
        SweepReport {
            spec: spec.clone(),
            cells: aggregate(results),
            failures: results
                .iter()
                .filter_map(|c| {
                    c.outcome.as_ref().err().map(|e| Failure {
                        dataset: c.dataset.clone(),
                        algorithm: c.algorithm.clone(),
                        seed: c.seed,
                        error: e.clone(),
                    })
                })
                .collect(),
        }
    }

    pub fn cell(&self, dataset: &str, algorithm: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.algorithm == algorithm)
    }
}

/// Groups results by (dataset, algorithm), in order of first appearance.
pub fn aggregate(results: &[CellResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for c in results {
        let key = (c.dataset.as_str(), c.algorithm.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(dataset, algorithm)| {
            let group: Vec<&CellResult> = results
                .iter()
                .filter(|c| c.dataset == dataset && c.algorithm == algorithm)
                .collect();
            let ok: Vec<_> = group
                .iter()
                .filter_map(|c| c.outcome.as_ref().ok())
                .collect();
            let horizon = group[0].horizon;
            let mean_curve = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
                if ok.is_empty() {
                    return Vec::new();
                }
                let mut acc = vec![0.0; horizon];
                for k in 0..ok.len() {
                    for (a, x) in acc.iter_mut().zip(f(k)) {
                        *a += x;
                    }
                }
                acc.iter().map(|a| a / ok.len() as f64).collect()
            };
            let regrets: Vec<f64> = ok.iter().map(|r| r.regret()).collect();
            CellSummary {
                dataset: dataset.to_string(),
                algorithm: algorithm.to_string(),
                horizon,
                failed: group.len() - ok.len(),
                regret: Stats::of(&regrets),
                mean_cumulative_regret: mean_curve(&|k| ok[k].cumulative_regret.clone()),
                mean_roundwise_reward: mean_curve(&|k| ok[k].roundwise_mean_reward.clone()),
            }
        })
        .collect()
}

/// Column names of the per-round CSV.
pub const CSV_HEADER: [&str; 6] = [
    "dataset",
    "algorithm",
    "seed",
    "t",
    "roundwise_mean_reward",
    "cumulative_regret",
];

/// One row per successful cell and 1-based round.
pub fn write_csv<W: Write>(results: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in results {
        let Ok(run) = &c.outcome else { continue };
        for (t, (r, g)) in run
            .roundwise_mean_reward
            .iter()
            .zip(&run.cumulative_regret)
            .enumerate()
        {
            w.serialize((&c.dataset, &c.algorithm, c.seed, t + 1, r, g))?;
        }
    }
    w.flush()?;
    Ok(())
}

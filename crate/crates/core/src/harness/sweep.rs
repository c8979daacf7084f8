use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::algorithm::Algorithm;
use crate::env::{generate_instance, GeneratorSpec};
use crate::error::{Error, Result};
use crate::{par, rng};

/// Grid of instance specs, algorithms, seeds and horizons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub instances: Vec<GeneratorSpec>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Horizons to run every instance at; empty means each spec's own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<usize>,
}

/// One (instance, horizon, algorithm, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub dataset: String,
    pub instance: usize,
    pub horizon: usize,
    pub algorithm: String,
    pub seed: u64,
    /// The run's curves, or the error or panic message of a failed cell.
    pub outcome: std::result::Result<CellRun, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellRun {
    pub roundwise_mean_reward: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    /// Largest per-pair recommendation count in the final ledger.
    pub max_count: u32,
    pub budget: usize,
}

impl CellRun {
    pub fn regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(Error::config(
                "a sweep needs at least one instance, algorithm and seed",
            ));
        }
        for spec in &self.instances {
            spec.validate()?;
            for &h in &self.horizons {
                spec.clone().with_horizon(h).validate()?;
            }
        }
        let mut labels = HashSet::new();
        for alg in &self.algorithms {
            alg.validate()?;
            if !labels.insert(alg.label()) {
                return Err(Error::config(format!(
                    "algorithm `{}` appears twice",
                    alg.label()
                )));
            }
        }
        Ok(())
    }

    fn horizon_grid(&self, spec: &GeneratorSpec) -> Vec<usize> {
        if self.horizons.is_empty() {
            vec![spec.horizon]
        } else {
            self.horizons.clone()
        }
    }

    /// Dataset column for instance `i` at horizon `h`: the dataset name,
    /// suffixed with the instance index when names repeat and with the
    /// horizon when there is a horizon grid.
    pub fn dataset_label(&self, i: usize, h: usize) -> String {
        let name = self.instances[i].dataset.name();
        let mut label = name.to_string();
        if self
            .instances
            .iter()
            .filter(|s| s.dataset.name() == name)
            .count()
            > 1
        {
            label.push_str(&format!("-{i}"));
        }
        if self.horizons.len() > 1 {
            label.push_str(&format!("-T{h}"));
        }
        label
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.instances
            .iter()
            .map(|s| self.horizon_grid(s).len())
            .sum::<usize>()
            * self.algorithms.len()
            * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seed for generating instance `i` of a sweep under master seed `seed`.
pub fn instance_seed(seed: u64, i: usize) -> u64 {
    rng::derive_seed(seed, "sweep-instance", &[i as u64])
}

/// Seed handed to the policy for instance `i` under master seed `seed`.
pub fn policy_seed(seed: u64, i: usize) -> u64 {
    rng::derive_seed(seed, "sweep-policy", &[i as u64])
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".into()
    }
}

fn run_cell(
    spec: &GeneratorSpec,
    alg: &Algorithm,
    i: usize,
    seed: u64,
) -> std::result::Result<CellRun, String> {
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<CellRun> {
        let inst = generate_instance(spec, instance_seed(seed, i))?;
        let ep = alg.run(&inst, policy_seed(seed, i))?;
        ep.ledger.audit()?;
        Ok(CellRun {
            roundwise_mean_reward: ep.trace.roundwise_mean_reward,
            cumulative_regret: ep.trace.cumulative_regret,
            max_count: ep.ledger.max_count(),
            budget: inst.budget(),
        })
    }));
    match outcome {
        Ok(Ok(run)) => Ok(run),
        Ok(Err(e)) => Err(e.to_string()),
        Err(payload) => Err(panic_message(payload)),
    }
}

/// Runs every cell, concurrently when the `parallel` feature is on. Results
/// come back in instance, horizon, algorithm, seed order; failed cells are
/// recorded rather than aborting the sweep.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.len());
    for (i, inst) in spec.instances.iter().enumerate() {
        for h in spec.horizon_grid(inst) {
            let sized = inst.clone().with_horizon(h);
            for alg in &spec.algorithms {
                for &seed in &spec.seeds {
                    cells.push((i, sized.clone(), alg, seed));
                }
            }
        }
    }
    Ok(par::map(&cells, |(i, inst, alg, seed)| CellResult {
        dataset: spec.dataset_label(*i, inst.horizon),
        instance: *i,
        horizon: inst.horizon,
        algorithm: alg.label(),
        seed: *seed,
        outcome: run_cell(inst, alg, *i, *seed),
    }))
}

//! B-LATTICE for instances whose items are clustered too, with `B = 1`.
//!
//! Differences from [`crate::blattice`]: a blocked explore entry reuses the
//! pair's earlier observation even if a previous estimate used it, and after
//! each clustering step the active items of a user component are closed
//! under an item similarity graph. Exploit sets are expanded the same way.

use serde::{Deserialize, Serialize};

use crate::blattice::{resolve_hyper, BlatticeConfig, BlatticeRun, Engine, Reuse};
use crate::env::{Instance, Simulation};
use crate::error::{Error, Result};

/// Hyper-parameters of the item-cluster variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BbuicConfig {
    pub blattice: BlatticeConfig,
    /// Items `a`, `b` are joined when every user of the component has
    /// estimates within `item_graph_factor * C * Delta_{l+1}` on them.
    pub item_graph_factor: f64,
}

impl Default for BbuicConfig {
    fn default() -> Self {
        BbuicConfig {
            blattice: BlatticeConfig::default(),
            item_graph_factor: 16.0,
        }
    }
}

impl BbuicConfig {
    pub fn validate(&self) -> Result<()> {
        self.blattice.validate()?;
        if !(self.item_graph_factor > 0.0) {
            return Err(Error::config("item_graph_factor must be positive"));
        }
        Ok(())
    }
}

/// Runs the item-cluster variant. Requires `B = 1`.
pub fn run_bbuic(inst: &Instance, cfg: &BbuicConfig, seed: u64) -> Result<BlatticeRun> {
    cfg.validate()?;
    if inst.budget() != 1 {
        return Err(Error::config(format!(
            "the item-cluster variant needs budget 1, got {}",
            inst.budget()
        )));
    }
    let (mu, sigma) = resolve_hyper(inst, cfg.blattice.mu, cfg.blattice.sigma)?;
    let mut sim = Simulation::new(inst, seed);
    let run = Engine::new(
        &mut sim,
        &cfg.blattice,
        Reuse::Unlimited,
        Some(cfg.item_graph_factor),
        seed,
        sigma,
        mu,
    )
    .run()?;
    let (trace, log, ledger) = sim.finish()?;
    Ok(BlatticeRun {
        trace,
        log,
        ledger,
        phases: run.phases,
        estimate: run.estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_separated, Dataset, GeneratorSpec, NoiseModel};
    use std::collections::HashSet;

    fn item_clustered(users: usize, items: usize, horizon: usize, seed: u64) -> Instance {
        let spec = GeneratorSpec::preset(Dataset::D2, users, items, 2, horizon, 1)
            .with_noise(NoiseModel::Gaussian { sigma: 0.0 })
            .with_item_clusters(2);
        generate_separated(&spec, 0.5, seed).unwrap()
    }

    #[test]
    fn rejects_budget_above_one() {
        let spec = GeneratorSpec::preset(Dataset::D2, 6, 6, 2, 4, 2).with_item_clusters(2);
        let inst = generate_separated(&spec, 0.5, 0).unwrap();
        assert!(run_bbuic(&inst, &BbuicConfig::default(), 0)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn never_repeats_a_pair() {
        let inst = item_clustered(30, 40, 30, 4);
        let run = run_bbuic(&inst, &BbuicConfig::default(), 4).unwrap();
        let mut seen = HashSet::new();
        for e in &run.log.events {
            assert!(
                seen.insert((e.user, e.item)),
                "{:?} repeated",
                (e.user, e.item)
            );
        }
        assert_eq!(run.ledger.max_count(), 1);
    }

    #[test]
    fn active_sets_are_closed_under_item_clusters() {
        let inst = item_clustered(40, 40, 30, 7);
        let run = run_bbuic(&inst, &BbuicConfig::default(), 7).unwrap();
        let ic = inst.item_cluster_of().unwrap();
        for rec in run.phases.iter().filter(|r| r.phase == 1) {
            for items in &rec.child_items {
                let clusters: HashSet<usize> = items.iter().map(|&j| ic[j]).collect();
                for (j, c) in ic.iter().enumerate() {
                    if clusters.contains(c) {
                        assert!(items.contains(&j), "item {j} missing from a closed set");
                    }
                }
            }
        }
    }
}

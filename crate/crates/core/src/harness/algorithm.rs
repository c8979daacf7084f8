use serde::{Deserialize, Serialize};

use crate::baselines::{
    run_collab_greedy, run_etc, run_oracle, run_pblattice, run_random, CollabConfig, EtcConfig,
    Exploration, PbLatticeConfig,
};
use crate::bbuic::{run_bbuic, BbuicConfig};
use crate::blattice::{run_blattice, BlatticeConfig, BlatticeRun};
use crate::env::{Episode, Instance};
use crate::error::Result;

/// A policy together with its hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Blattice(BlatticeConfig),
    Bbuic(BbuicConfig),
    Etc(EtcConfig),
    Pblattice(PbLatticeConfig),
    CollabGreedy(CollabConfig),
    Oracle,
    Random,
}

impl Algorithm {
    /// Series name used in output files.
    pub fn label(&self) -> String {
        match self {
            Algorithm::Blattice(_) => "blattice".into(),
            Algorithm::Bbuic(_) => "bbuic".into(),
            Algorithm::Etc(cfg) => match cfg.exploration {
                Exploration::Rounds { m } => format!("etc_m{m}"),
                Exploration::Probability { p } => format!("etc_p{p}"),
                Exploration::Formula { .. } => "etc".into(),
            },
            Algorithm::Pblattice(_) => "pblattice".into(),
            Algorithm::CollabGreedy(_) => "collab_greedy".into(),
            Algorithm::Oracle => "oracle".into(),
            Algorithm::Random => "random".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Blattice(cfg) => cfg.validate(),
            Algorithm::Bbuic(cfg) => cfg.validate(),
            Algorithm::Etc(cfg) => cfg.validate(),
            Algorithm::Pblattice(cfg) => cfg.validate(),
            Algorithm::CollabGreedy(cfg) => cfg.validate(),
            Algorithm::Oracle | Algorithm::Random => Ok(()),
        }
    }

    pub fn run(&self, inst: &Instance, seed: u64) -> Result<Episode> {
        match self {
            Algorithm::Blattice(cfg) => run_blattice(inst, cfg, seed).map(Episode::from),
            Algorithm::Bbuic(cfg) => run_bbuic(inst, cfg, seed).map(Episode::from),
            Algorithm::Etc(cfg) => run_etc(inst, cfg, seed),
            Algorithm::Pblattice(cfg) => run_pblattice(inst, cfg, seed).map(|r| r.episode),
            Algorithm::CollabGreedy(cfg) => run_collab_greedy(inst, cfg, seed),
            Algorithm::Oracle => run_oracle(inst),
            Algorithm::Random => run_random(inst, seed),
        }
    }
}

impl From<BlatticeRun> for Episode {
    fn from(run: BlatticeRun) -> Self {
        Episode {
            trace: run.trace,
            log: run.log,
            ledger: run.ledger,
        }
    }
}

//! B-LATTICE: phased exploration by matrix completion, golden-item
//! exploitation and user clustering.
//!
//! Each phase halves the target accuracy. A group of users first exploits
//! items whose estimated advantage is large enough to be safe, then samples
//! a Bernoulli mask over its active items, completes the sub-matrix, splits
//! into connected components of a user-similarity graph and keeps only the
//! items that can still be golden for some member.

mod engine;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::completion::{diagnostics, SolverConfig};
use crate::env::{BlockingLedger, EventLog, Instance, Simulation};
use crate::error::{Error, Result};
use crate::graph;
use crate::harness::RegretTrace;

pub(crate) use engine::{Engine, Reuse};
pub use engine::{NiceGroup, PhaseRecord, PhaseRun};

/// Initial accuracy `epsilon_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Eps1 {
    /// `scale * ||P||_inf` (of the observation means).
    MaxReward { scale: f64 },
    /// `c / ln M`.
    InverseLogUsers { c: f64 },
}

impl Default for Eps1 {
    fn default() -> Self {
        Eps1::MaxReward { scale: 1.0 }
    }
}

impl Eps1 {
    pub fn value(&self, p_max: f64, users: usize) -> f64 {
        match self {
            Eps1::MaxReward { scale } => scale * p_max,
            Eps1::InverseLogUsers { c } => c / (users.max(2) as f64).ln(),
        }
    }
}

/// Hyper-parameters of B-LATTICE.
///
/// `delta_divisor` and `gap_factor` are the constants of
/// `Delta_l = epsilon_l / (delta_divisor * C)` and of the exploit test
/// `gap_factor * C * Delta_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlatticeConfig {
    pub eps1: Eps1,
    pub c_sampling: f64,
    /// Sample-complexity floor `c_floor * mu^2 * ln d1 / d2` on the sampling
    /// probability; the noise-driven term vanishes when sigma = 0.
    pub c_floor: f64,
    pub delta_divisor: f64,
    pub gap_factor: f64,
    /// Incoherence bound; defaults to the instance diagnostics.
    pub mu: Option<f64>,
    /// Noise scale; defaults to the instance noise model.
    pub sigma: Option<f64>,
    /// Phases after which the group falls back to the edge branch.
    pub max_phases: usize,
    pub solver: SolverConfig,
}

impl Default for BlatticeConfig {
    fn default() -> Self {
        BlatticeConfig {
            eps1: Eps1::default(),
            c_sampling: 1.0,
            c_floor: 3.0,
            delta_divisor: 88.0,
            gap_factor: 64.0,
            mu: None,
            sigma: None,
            max_phases: 32,
            solver: SolverConfig::default(),
        }
    }
}

impl BlatticeConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let positive = [self.c_sampling, self.delta_divisor, self.gap_factor];
        if positive.iter().any(|x| !(*x > 0.0)) || !(self.c_floor >= 0.0) {
            return Err(Error::config("B-LATTICE constants must be positive"));
        }
        if self.mu.is_some_and(|m| !(m > 0.0)) || self.sigma.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::config("mu must be positive and sigma non-negative"));
        }
        let e = match self.eps1 {
            Eps1::MaxReward { scale } => scale,
            Eps1::InverseLogUsers { c } => c,
        };
        if !(e > 0.0) {
            return Err(Error::config("epsilon_1 must be positive"));
        }
        Ok(())
    }
}

/// Everything a B-LATTICE run produces.
#[derive(Clone, Debug)]
pub struct BlatticeRun {
    pub trace: RegretTrace,
    pub log: EventLog,
    pub ledger: BlockingLedger,
    pub phases: Vec<PhaseRecord>,
    pub estimate: DMatrix<f64>,
}

impl BlatticeRun {
    /// User components formed at the end of phase `phase`.
    pub fn components_after(&self, phase: usize) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .phases
            .iter()
            .filter(|r| r.phase == phase)
            .flat_map(|r| r.components.iter().cloned())
            .collect();
        out.sort();
        out
    }
}

/// `c * sigma^2 * mu^3 * ln d1 / (Delta^2 * d2)` with `d1`, `d2` the larger
/// and smaller side of the group's sub-matrix. Not clamped.
pub fn sampling_prob(
    users: usize,
    items: usize,
    delta_next: f64,
    sigma: f64,
    mu: f64,
    c: f64,
) -> f64 {
    let d1 = users.max(items) as f64;
    let d2 = users.min(items).max(1) as f64;
    c * sigma * sigma * mu.powi(3) * d1.ln() / (delta_next * delta_next * d2)
}

/// Sampling probability actually used: the larger of [`sampling_prob`] and
/// the floor `c_floor * mu^2 * ln d1 / d2`.
pub fn explore_prob(
    users: usize,
    items: usize,
    delta_next: f64,
    sigma: f64,
    mu: f64,
    c: f64,
    c_floor: f64,
) -> f64 {
    let d1 = users.max(items) as f64;
    let d2 = users.min(items).max(1) as f64;
    let floor = c_floor * mu * mu * d1.ln() / d2;
    sampling_prob(users, items, delta_next, sigma, mu, c).max(floor)
}

/// 1-based rank of the item that separates golden candidates:
/// `ceil(T/B) - floor(t_exploit / B)`, at least 1.
pub fn golden_rank(horizon: usize, budget: usize, t_exploit: usize) -> usize {
    horizon
        .div_ceil(budget)
        .saturating_sub(t_exploit / budget)
        .max(1)
}

/// Local item indices within `2 * delta_next` of the row's `rank`-th best.
pub fn good_set(row: &[f64], rank: usize, delta_next: f64) -> Vec<usize> {
    if row.is_empty() {
        return Vec::new();
    }
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let pivot = sorted[rank.clamp(1, row.len()) - 1];
    (0..row.len())
        .filter(|&j| pivot - row[j] <= 2.0 * delta_next)
        .collect()
}

/// Splits the rows of `est` (users x active items) into connected components
/// of the graph joining users whose estimates agree within `2 * delta_next`
/// on every item. Each component gets the union of its members' good sets.
/// Indices are local to `est`.
pub fn cluster_users(
    est: &DMatrix<f64>,
    rank: usize,
    delta_next: f64,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (nu, ni) = est.shape();
    let thr = 2.0 * delta_next;
    let comps = graph::components(nu, |a, b| {
        (0..ni).all(|x| (est[(a, x)] - est[(b, x)]).abs() <= thr)
    });
    comps
        .into_iter()
        .map(|members| {
            let mut keep = vec![false; ni];
            for &u in &members {
                let row: Vec<f64> = est.row(u).iter().copied().collect();
                for j in good_set(&row, rank, delta_next) {
                    keep[j] = true;
                }
            }
            let items = (0..ni).filter(|&j| keep[j]).collect();
            (members, items)
        })
        .collect()
}

/// Incoherence bound and noise scale the policy assumes known.
pub(crate) fn resolve_hyper(
    inst: &Instance,
    mu: Option<f64>,
    sigma: Option<f64>,
) -> Result<(f64, f64)> {
    let mu = match mu {
        Some(m) => m,
        None => diagnostics(
            inst.mean_reward_matrix(),
            inst.cluster_of(),
            inst.clusters(),
        )?
        .mu(),
    };
    let sigma = sigma.unwrap_or_else(|| inst.noise().sigma());
    Ok((mu, sigma))
}

/// Runs B-LATTICE on `inst` with reward noise and decisions derived from
/// `seed`.
pub fn run_blattice(inst: &Instance, cfg: &BlatticeConfig, seed: u64) -> Result<BlatticeRun> {
    cfg.validate()?;
    let (mu, sigma) = resolve_hyper(inst, cfg.mu, cfg.sigma)?;
    let mut sim = Simulation::new(inst, seed);
    let run = Engine::new(&mut sim, cfg, Reuse::Once, None, seed, sigma, mu).run()?;
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
    use crate::env::Purpose;
    use crate::env::{generate_instance, Dataset, GeneratorSpec, NoiseModel};

    #[test]
    fn sampling_prob_scaling() {
        let base = sampling_prob(100, 100, 0.1, 0.5, 2.0, 1.0);
        let expected = 0.25 * 8.0 * 100f64.ln() / (0.01 * 100.0);
        assert!((base - expected).abs() < 1e-12);
        let halved = sampling_prob(100, 100, 0.05, 0.5, 2.0, 1.0);
        assert!((halved / base - 4.0).abs() < 1e-12);
        // d2 doubles with d1 fixed
        let wide = sampling_prob(100, 50, 0.1, 0.5, 2.0, 1.0);
        let wider = sampling_prob(100, 25, 0.1, 0.5, 2.0, 1.0);
        assert!((wide / wider - 0.5).abs() < 1e-12);
    }

    #[test]
    fn floor_applies_without_noise() {
        assert_eq!(sampling_prob(50, 50, 0.01, 0.0, 2.0, 1.0), 0.0);
        let p = explore_prob(50, 50, 0.01, 0.0, 2.0, 1.0, 0.5);
        assert!((p - 0.5 * 4.0 * 50f64.ln() / 50.0).abs() < 1e-12);
    }

    #[test]
    fn golden_rank_uses_ceiling_and_floor() {
        assert_eq!(golden_rank(10, 3, 0), 4);
        assert_eq!(golden_rank(10, 3, 4), 3);
        assert_eq!(golden_rank(10, 3, 30), 1);
    }

    #[test]
    fn clustering_extremes() {
        let est = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.9, 0.1, 0.0, 1.0]);
        let all = cluster_users(&est, 1, 10.0);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].1, vec![0, 1]);
        let none = cluster_users(&est, 1, 0.0);
        assert_eq!(none.len(), 3);
        assert_eq!(none[0].1, vec![0]);
        assert_eq!(none[2].1, vec![1]);
    }

    #[test]
    fn separated_clusters_split_in_two() {
        // gap 1.0 on item 0 exceeds 4 * delta
        let est = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.5, 0.2, 0.0, 0.5, 0.2, 1.0, 0.5, 0.2, 0.0, 0.5, 0.2],
        );
        let parts = cluster_users(&est, 1, 0.2);
        let members: Vec<Vec<usize>> = parts.into_iter().map(|p| p.0).collect();
        assert_eq!(members, vec![vec![0, 2], vec![1, 3]]);
    }

    fn noiseless(
        users: usize,
        items: usize,
        clusters: usize,
        horizon: usize,
        budget: usize,
    ) -> Instance {
        let spec = GeneratorSpec::preset(Dataset::D2, users, items, clusters, horizon, budget)
            .with_noise(NoiseModel::Gaussian { sigma: 0.0 });
        generate_instance(&spec, 11).unwrap()
    }

    #[test]
    fn run_respects_protocol() {
        let inst = noiseless(12, 15, 2, 10, 2);
        let run = run_blattice(&inst, &BlatticeConfig::default(), 3).unwrap();
        assert_eq!(run.log.events.len(), 12 * 10);
        assert!(run.ledger.max_count() <= 2);
        run.ledger.audit().unwrap();
        assert!(run.trace.regret() >= -1e-9);
    }

    #[test]
    fn single_cluster_graph_is_complete() {
        let inst = noiseless(30, 30, 1, 40, 3);
        let cfg = BlatticeConfig {
            mu: Some(1.0),
            ..BlatticeConfig::default()
        };
        let run = run_blattice(&inst, &cfg, 5).unwrap();
        assert_eq!(run.phases[0].components.len(), 1);
        assert!(run.phases.iter().all(|r| r.components.len() <= 1));
        let exploit = run
            .log
            .events
            .iter()
            .filter(|e| e.purpose == Purpose::Exploit)
            .count();
        assert!(exploit > 0);
    }
}

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::completion::{diagnostics, estimate, CompletionProblem, SolverConfig};
use crate::env::{Episode, Instance, Purpose, Simulation};
use crate::error::{Error, Result};
use crate::rng;

/// How many entries ETC samples before committing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exploration {
    /// Bernoulli mask with probability
    /// `c_rate * (N ||P||_inf)^(-2/3) (T sigma r sqrt(mu^3) / sqrt(d2))^(2/3)`,
    /// floored at `c_floor * mu^2 / d2`.
    Formula { c_rate: f64, c_floor: f64 },
    /// Bernoulli mask with a fixed probability.
    Probability { p: f64 },
    /// Exactly `m` distinct random items per user.
    Rounds { m: usize },
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration::Formula {
            c_rate: 1.0,
            c_floor: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtcConfig {
    pub exploration: Exploration,
    /// Incoherence bound; defaults to the instance diagnostics.
    pub mu: Option<f64>,
    /// Noise scale; defaults to the instance noise model.
    pub sigma: Option<f64>,
    pub solver: SolverConfig,
}

impl EtcConfig {
    pub fn with_rounds(m: usize) -> Self {
        EtcConfig {
            exploration: Exploration::Rounds { m },
            ..EtcConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        match self.exploration {
            Exploration::Formula { c_rate, c_floor } if !(c_rate > 0.0 && c_floor >= 0.0) => {
                Err(Error::config("ETC formula constants must be positive"))
            }
            Exploration::Probability { p } if !(p > 0.0 && p <= 1.0) => Err(Error::config(
                format!("ETC probability {p} is outside (0, 1]"),
            )),
            Exploration::Rounds { m: 0 } => {
                Err(Error::config("ETC needs at least one exploration round"))
            }
            _ => Ok(()),
        }
    }
}

/// The exploration probability of the formula variant, unclamped.
#[allow(clippy::too_many_arguments)]
pub fn etc_probability(
    users: usize,
    items: usize,
    horizon: usize,
    rank: usize,
    p_max: f64,
    sigma: f64,
    mu: f64,
    c_rate: f64,
    c_floor: f64,
) -> f64 {
    let d2 = users.min(items) as f64;
    let rate = (items as f64 * p_max).powf(-2.0 / 3.0)
        * (horizon as f64 * sigma * rank as f64 * mu.powf(1.5) / d2.sqrt()).powf(2.0 / 3.0);
    (c_rate * rate).max(c_floor * mu * mu / d2)
}

/// Explore-then-commit: one exploration block over a random mask, one
/// completion estimate, then each user's best-estimated unblocked item every
/// remaining round.
pub fn run_etc(inst: &Instance, cfg: &EtcConfig, seed: u64) -> Result<Episode> {
    cfg.validate()?;
    let (m_users, n_items, horizon) = (inst.users(), inst.items(), inst.horizon());
    let sigma = cfg.sigma.unwrap_or_else(|| inst.noise().sigma());
    let mut mask_rng = rng::stream(seed, "etc-mask", &[]);

    let targets: Vec<Vec<usize>> = match cfg.exploration {
        Exploration::Rounds { m } => (0..m_users)
            .map(|_| {
                let mut items: Vec<usize> = (0..n_items).collect();
                items.shuffle(&mut mask_rng);
                items.truncate(m.min(n_items));
                items
            })
            .collect(),
        ref e => {
            let p = match *e {
                Exploration::Probability { p } => p,
                Exploration::Formula { c_rate, c_floor } => {
                    let mu = match cfg.mu {
                        Some(mu) => mu,
                        None => diagnostics(
                            inst.mean_reward_matrix(),
                            inst.cluster_of(),
                            inst.clusters(),
                        )?
                        .mu(),
                    };
                    etc_probability(
                        m_users,
                        n_items,
                        horizon,
                        inst.clusters(),
                        inst.mean_max(),
                        sigma,
                        mu,
                        c_rate,
                        c_floor,
                    )
                }
                Exploration::Rounds { .. } => unreachable!(),
            };
            let p = if p > 1.0 || !(p > 0.0) {
                log::warn!("ETC probability {p:.4} clamped into (0, 1]");
                p.clamp(f64::MIN_POSITIVE, 1.0)
            } else {
                p
            };
            (0..m_users)
                .map(|_| {
                    let mut row: Vec<usize> =
                        (0..n_items).filter(|_| mask_rng.gen::<f64>() < p).collect();
                    row.shuffle(&mut mask_rng);
                    row
                })
                .collect()
        }
    };

    let m = targets.iter().map(Vec::len).max().unwrap_or(0);
    let explore_end = m.min(horizon);
    let mut sim = Simulation::new(inst, seed);
    let est_id = sim.begin_estimate();
    let mut omega = Vec::new();
    let mut values = Vec::new();
    let mut in_omega = vec![false; n_items];
    for (u, row) in targets.iter().enumerate() {
        in_omega.iter_mut().for_each(|x| *x = false);
        for &j in row {
            in_omega[j] = true;
        }
        let mut fill_rng = rng::stream(seed, "etc-fill", &[u as u64]);
        for t in 0..explore_end {
            if let Some(&j) = row.get(t) {
                let (e, reward) = sim.recommend(u, j, t, Purpose::Explore)?;
                sim.consume(est_id, e, false);
                omega.push((u, j));
                values.push(reward);
            } else {
                let open: Vec<usize> = (0..n_items)
                    .filter(|&j| !in_omega[j] && !sim.is_blocked(u, j))
                    .collect();
                let j = match open.choose(&mut fill_rng) {
                    Some(&j) => j,
                    None => sim
                        .first_unblocked(u)
                        .expect("N * B >= T leaves an unblocked item"),
                };
                sim.recommend(u, j, t, Purpose::ExploreFill)?;
            }
        }
    }
    if explore_end >= horizon {
        return sim.into_episode();
    }

    let prob = CompletionProblem::new(m_users, n_items, omega, values, inst.clusters(), sigma)?;
    let mut split_rng = rng::stream(seed, "etc-split", &[]);
    let est = estimate(&prob, &cfg.solver, &mut split_rng)?.estimate;
    for u in 0..m_users {
        let mut order: Vec<usize> = (0..n_items).collect();
        order.sort_by(|&a, &b| est[(u, b)].total_cmp(&est[(u, a)]).then(a.cmp(&b)));
        let mut cursor = 0;
        for t in explore_end..horizon {
            while sim.is_blocked(u, order[cursor]) {
                cursor += 1;
            }
            sim.recommend(u, order[cursor], t, Purpose::Commit)?;
        }
    }
    sim.into_episode()
}

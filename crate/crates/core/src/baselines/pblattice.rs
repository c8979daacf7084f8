use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{elbow, KMeansConfig};
use crate::completion::{solve_with_lambda, CompletionProblem, SolverConfig};
use crate::env::{Episode, Instance, Purpose, Simulation};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Hyper-parameters of PB-LATTICE. Phase `l` lasts
/// `base_length + length_slope * l` rounds and prunes with gap
/// `||P||_inf / (gap_divisor * 2^l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbLatticeConfig {
    pub base_length: usize,
    pub length_slope: usize,
    pub gap_divisor: f64,
    /// `lambda = lambda_factor * sigma * sqrt(m_l / M)`.
    pub lambda_factor: f64,
    /// Largest `k` tried by the elbow search; defaults to the instance's `C`.
    pub clusters: Option<usize>,
    /// Noise scale; defaults to the instance noise model.
    pub sigma: Option<f64>,
    /// Feed every earlier observation of the group on its active items to
    /// the estimate, not only the current phase's.
    pub reuse_observations: bool,
    pub pivot: PivotRule,
    pub kmeans: KMeansConfig,
    pub solver: SolverConfig,
}

/// Which estimated rank an item must stay within `nu_l` of to remain
/// active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// The `ceil(T / B)`-th best item.
    Horizon,
    /// The `ceil((T - t) / B)`-th best item, `t` the rounds already played.
    Remaining,
}

impl Default for PbLatticeConfig {
    fn default() -> Self {
        PbLatticeConfig {
            base_length: 10,
            length_slope: 2,
            gap_divisor: 8.0,
            lambda_factor: 10.0,
            clusters: None,
            sigma: None,
            reuse_observations: true,
            pivot: PivotRule::Horizon,
            kmeans: KMeansConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl PbLatticeConfig {
    pub fn validate(&self) -> Result<()> {
        self.kmeans.validate()?;
        self.solver.validate()?;
        if self.base_length + self.length_slope == 0 {
            return Err(Error::config(
                "PB-LATTICE phases must last at least one round",
            ));
        }
        if !(self.gap_divisor > 0.0 && self.lambda_factor >= 0.0) {
            return Err(Error::config(
                "gap_divisor must be positive and lambda_factor non-negative",
            ));
        }
        if self.clusters == Some(0) || self.sigma.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::config(
                "clusters must be positive and sigma non-negative",
            ));
        }
        Ok(())
    }

    pub fn phase_length(&self, phase: usize) -> usize {
        self.base_length + self.length_slope * phase
    }

    pub fn gap(&self, phase: usize, p_max: f64) -> f64 {
        p_max / (self.gap_divisor * 2f64.powi(phase as i32))
    }
}

/// One group in one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbGroupRecord {
    pub users: Vec<usize>,
    pub active_items: usize,
    /// Number of clusters the elbow search picked (0 if the run ended first).
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbPhaseRecord {
    pub phase: usize,
    pub start_round: usize,
    pub length: usize,
    pub gap: f64,
    pub lambda: f64,
    pub groups: Vec<PbGroupRecord>,
}

#[derive(Clone, Debug)]
pub struct PbLatticeRun {
    pub episode: Episode,
    pub phases: Vec<PbPhaseRecord>,
}

struct Group {
    users: Vec<usize>,
    items: Vec<usize>,
}

/// Runs PB-LATTICE: phases of random recommendations inside each group's
/// active set, a nuclear-norm estimate per group, k-means user clustering
/// with elbow selection and gap-based item pruning.
pub fn run_pblattice(inst: &Instance, cfg: &PbLatticeConfig, seed: u64) -> Result<PbLatticeRun> {
    cfg.validate()?;
    let horizon = inst.horizon();
    let sigma = cfg.sigma.unwrap_or_else(|| inst.noise().sigma());
    let k_max = cfg.clusters.unwrap_or(inst.clusters());
    let golden = horizon.div_ceil(inst.budget());
    let scale = inst.mean_max();
    let mut sim = Simulation::new(inst, seed);
    let mut groups = vec![Group {
        users: (0..inst.users()).collect(),
        items: (0..inst.items()).collect(),
    }];
    let mut phases = Vec::new();
    let mut history: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    let mut t0 = 0;
    let mut phase = 1;

    while t0 < horizon {
        let m = cfg.phase_length(phase);
        let end = (t0 + m).min(horizon);
        let lambda = cfg.lambda_factor * sigma * (m as f64 / inst.users() as f64).sqrt();
        let gap = cfg.gap(phase, scale);
        let est_id = sim.begin_estimate();

        // observations per group, keyed by (local user, local item)
        let mut observed: Vec<BTreeMap<(usize, usize), (f64, usize)>> =
            Vec::with_capacity(groups.len());
        for (g, group) in groups.iter().enumerate() {
            let mut obs = BTreeMap::new();
            let mut open = Vec::with_capacity(group.items.len());
            for (iu, &u) in group.users.iter().enumerate() {
                let mut pick = rng::stream(seed, "pbl-pick", &[phase as u64, g as u64, u as u64]);
                for t in t0..end {
                    let k = pick.gen_range(0..group.items.len());
                    let k = if sim.is_blocked(u, group.items[k]) {
                        open.clear();
                        open.extend(
                            (0..group.items.len()).filter(|&x| !sim.is_blocked(u, group.items[x])),
                        );
                        open.choose(&mut pick).copied()
                    } else {
                        Some(k)
                    };
                    match k {
                        Some(k) => {
                            let (e, reward) =
                                sim.recommend(u, group.items[k], t, Purpose::Explore)?;
                            sim.consume(est_id, e, false);
                            let slot = obs.entry((iu, k)).or_insert((0.0, 0));
                            slot.0 += reward;
                            slot.1 += 1;
                            let slot = history.entry((u, group.items[k])).or_insert((0.0, 0));
                            slot.0 += reward;
                            slot.1 += 1;
                        }
                        None => {
                            let all: Vec<usize> = (0..inst.items())
                                .filter(|&j| !sim.is_blocked(u, j))
                                .collect();
                            let j = *all
                                .choose(&mut pick)
                                .expect("N * B >= T leaves an unblocked item");
                            sim.recommend(u, j, t, Purpose::ExploreFill)?;
                        }
                    }
                }
            }
            observed.push(obs);
        }

        let mut record = PbPhaseRecord {
            phase,
            start_round: t0,
            length: end - t0,
            gap,
            lambda,
            groups: groups
                .iter()
                .map(|g| PbGroupRecord {
                    users: g.users.clone(),
                    active_items: g.items.len(),
                    k: 0,
                })
                .collect(),
        };
        t0 = end;
        if t0 >= horizon {
            phases.push(record);
            break;
        }

        if cfg.reuse_observations {
            for (group, obs) in groups.iter().zip(observed.iter_mut()) {
                for (iu, &u) in group.users.iter().enumerate() {
                    for (k, &j) in group.items.iter().enumerate() {
                        if let Some(&v) = history.get(&(u, j)) {
                            obs.insert((iu, k), v);
                        }
                    }
                }
            }
        }
        let rank = match cfg.pivot {
            PivotRule::Horizon => golden,
            PivotRule::Remaining => (horizon - t0).div_ceil(inst.budget()),
        };
        let problems: Vec<Option<CompletionProblem>> = groups
            .iter()
            .zip(&observed)
            .map(|(g, obs)| {
                if obs.is_empty() {
                    return Ok(None);
                }
                let (omega, values) = obs
                    .iter()
                    .map(|(&key, &(s, c))| (key, s / c as f64))
                    .unzip();
                CompletionProblem::new(g.users.len(), g.items.len(), omega, values, k_max, sigma)
                    .map(Some)
            })
            .collect::<Result<_>>()?;
        let estimates: Vec<Result<Option<DMatrix<f64>>>> = par::map(&problems, |prob| match prob {
            None => Ok(None),
            Some(prob) => {
                let lam = if lambda > 0.0 {
                    lambda
                } else {
                    cfg.solver.lambda_for(prob)
                };
                solve_with_lambda(prob, lam, &cfg.solver).map(|r| Some(r.estimate))
            }
        });

        let mut next = Vec::new();
        for (g, (group, est)) in groups.iter().zip(estimates).enumerate() {
            let Some(est) = est? else {
                next.push(Group {
                    users: group.users.clone(),
                    items: group.items.clone(),
                });
                continue;
            };
            let mut krng = rng::stream(seed, "pbl-kmeans", &[phase as u64, g as u64]);
            let fit = elbow(&est, k_max.min(group.users.len()), &cfg.kmeans, &mut krng)?;
            record.groups[g].k = fit.centers.len();
            let pivot: Vec<f64> = (0..group.users.len())
                .map(|iu| {
                    let mut row: Vec<f64> = est.row(iu).iter().copied().collect();
                    row.sort_by(|a, b| b.total_cmp(a));
                    row[rank.clamp(1, row.len()) - 1]
                })
                .collect();
            for c in 0..fit.centers.len() {
                let members: Vec<usize> = (0..group.users.len())
                    .filter(|&iu| fit.labels[iu] == c)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let items: Vec<usize> = (0..group.items.len())
                    .filter(|&k| members.iter().any(|&iu| est[(iu, k)] >= pivot[iu] - gap))
                    .map(|k| group.items[k])
                    .collect();
                next.push(Group {
                    users: members.iter().map(|&iu| group.users[iu]).collect(),
                    items,
                });
            }
        }
        phases.push(record);
        groups = next;
        phase += 1;
    }

    Ok(PbLatticeRun {
        episode: sim.into_episode()?,
        phases,
    })
}

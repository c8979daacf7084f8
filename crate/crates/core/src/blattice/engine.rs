//! Phase engine shared by B-LATTICE and its item-cluster variant.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cluster_users, explore_prob, golden_rank, BlatticeConfig};
use crate::completion::{estimate, CompletionProblem};
use crate::env::{Purpose, Simulation};
use crate::error::Result;
use crate::graph;
use crate::rng;

/// How an explore step handles an `Omega` entry that is already blocked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Reuse {
    /// Consume one stored, never-used observation (moving a count from `L`
    /// to `K`); drop the entry if there is none.
    Once,
    /// Reuse the latest observation of the pair, even if an earlier
    /// estimate already used it.
    Unlimited,
}

/// A group of users believed to be a union of whole clusters, with the
/// items still considered for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceGroup {
    pub users: Vec<usize>,
    pub active_items: Vec<usize>,
    /// Items already recommended by exploit components, in order.
    pub chosen_golden: Vec<usize>,
}

/// What happened to one group in one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub start_round: usize,
    pub users: Vec<usize>,
    pub active_items: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_next: f64,
    /// Golden sets recommended by the exploit component.
    pub exploit_sets: Vec<Vec<usize>>,
    pub explore_start: usize,
    /// Sampling probability before clamping.
    pub p: f64,
    pub explored: bool,
    pub explore_rounds: usize,
    /// Observed entries dropped because they were blocked with nothing to
    /// reuse.
    pub dropped: usize,
    /// Child groups (empty when the phase ended in the edge branch or ran
    /// out of rounds).
    pub components: Vec<Vec<usize>>,
    pub child_items: Vec<Vec<usize>>,
    pub end_round: usize,
}

/// Outcome of a full run.
#[derive(Clone, Debug)]
pub struct PhaseRun {
    pub phases: Vec<PhaseRecord>,
    pub estimate: DMatrix<f64>,
}

struct Pending {
    group: NiceGroup,
    phase: usize,
    t: usize,
    t_exploit: usize,
    eps: f64,
    /// Item-graph component of each item of the parent active set.
    item_comp: Option<HashMap<usize, usize>>,
}

pub(crate) struct Engine<'s, 'i> {
    sim: &'s mut Simulation<'i>,
    cfg: &'s BlatticeConfig,
    reuse: Reuse,
    item_graph_factor: Option<f64>,
    seed: u64,
    p_tilde: DMatrix<f64>,
    sigma: f64,
    mu: f64,
    scale: f64,
    phases: Vec<PhaseRecord>,
}

impl<'s, 'i> Engine<'s, 'i> {
    pub(crate) fn new(
        sim: &'s mut Simulation<'i>,
        cfg: &'s BlatticeConfig,
        reuse: Reuse,
        item_graph_factor: Option<f64>,
        seed: u64,
        sigma: f64,
        mu: f64,
    ) -> Self {
        let inst = sim.instance();
        let p_tilde = DMatrix::zeros(inst.users(), inst.items());
        let scale = inst.mean_max();
        Engine {
            sim,
            cfg,
            reuse,
            item_graph_factor,
            seed,
            p_tilde,
            sigma,
            mu,
            scale,
            phases: Vec::new(),
        }
    }

    fn horizon(&self) -> usize {
        self.sim.horizon()
    }

    fn clusters(&self) -> f64 {
        self.sim.instance().clusters() as f64
    }

    pub(crate) fn run(mut self) -> Result<PhaseRun> {
        let inst = self.sim.instance();
        let root = NiceGroup {
            users: (0..inst.users()).collect(),
            active_items: (0..inst.items()).collect(),
            chosen_golden: Vec::new(),
        };
        let eps1 = self.cfg.eps1.value(self.scale, inst.users());
        let mut queue = VecDeque::new();
        queue.push_back(Pending {
            group: root,
            phase: 1,
            t: 0,
            t_exploit: 0,
            eps: eps1,
            item_comp: None,
        });
        while let Some(job) = queue.pop_front() {
            for child in self.process(job)? {
                queue.push_back(child);
            }
        }
        Ok(PhaseRun {
            phases: self.phases,
            estimate: self.p_tilde,
        })
    }

    fn process(&mut self, job: Pending) -> Result<Vec<Pending>> {
        let horizon = self.horizon();
        let Pending {
            mut group,
            phase,
            mut t,
            mut t_exploit,
            eps,
            item_comp,
        } = job;
        if t >= horizon {
            return Ok(Vec::new());
        }
        let c = self.clusters();
        let d = self.cfg.delta_divisor;
        let delta = if phase == 1 {
            self.scale
        } else {
            eps / (d * c)
        };
        let eps_next = eps / 2.0;
        let delta_next = eps_next / (d * c);
        let mut rec = PhaseRecord {
            phase,
            start_round: t,
            users: group.users.clone(),
            active_items: group.active_items.len(),
            epsilon: eps,
            delta,
            delta_next,
            exploit_sets: Vec::new(),
            explore_start: t,
            p: 0.0,
            explored: false,
            explore_rounds: 0,
            dropped: 0,
            components: Vec::new(),
            child_items: Vec::new(),
            end_round: t,
        };

        let sets = self.exploit(
            &mut group,
            &mut t,
            &mut t_exploit,
            delta,
            delta_next,
            item_comp.as_ref(),
        )?;
        rec.exploit_sets = sets;
        rec.explore_start = t;
        if t >= horizon {
            rec.end_round = horizon;
            self.phases.push(rec);
            return Ok(Vec::new());
        }

        let p = explore_prob(
            group.users.len(),
            group.active_items.len(),
            delta_next,
            self.sigma,
            self.mu,
            self.cfg.c_sampling,
            self.cfg.c_floor,
        );
        rec.p = p;
        let big_enough = group.active_items.len() as f64 >= (horizon as f64).cbrt();
        if !(big_enough && p < 1.0) || phase > self.cfg.max_phases {
            self.edge_fill(&group, t)?;
            rec.end_round = horizon;
            self.phases.push(rec);
            return Ok(Vec::new());
        }

        rec.explored = true;
        let (end, dropped) = self.explore(&group, t, p, phase)?;
        rec.explore_rounds = end - t;
        rec.dropped = dropped;
        t = end;
        rec.end_round = t;
        if t >= horizon {
            self.phases.push(rec);
            return Ok(Vec::new());
        }

        let rank = golden_rank(horizon, self.sim.instance().budget(), t_exploit);
        let sub = self.sub_estimate(&group);
        let parts = cluster_users(&sub, rank, delta_next);
        let mut children = Vec::new();
        for (members, items) in parts {
            let users: Vec<usize> = members.iter().map(|&i| group.users[i]).collect();
            let mut active: Vec<usize> = items.iter().map(|&j| group.active_items[j]).collect();
            let mut comp_map = None;
            if let Some(factor) = self.item_graph_factor {
                let (closed, map) =
                    self.item_closure(&sub, &members, &items, &group, factor * c * delta_next);
                active = closed;
                comp_map = Some(map);
            }
            rec.components.push(users.clone());
            rec.child_items.push(active.clone());
            children.push(Pending {
                group: NiceGroup {
                    users,
                    active_items: active,
                    chosen_golden: group.chosen_golden.clone(),
                },
                phase: phase + 1,
                t,
                t_exploit,
                eps: eps_next,
                item_comp: comp_map,
            });
        }
        self.phases.push(rec);
        Ok(children)
    }

    /// Current estimate restricted to the group (rows: users, columns:
    /// active items).
    fn sub_estimate(&self, group: &NiceGroup) -> DMatrix<f64> {
        DMatrix::from_fn(group.users.len(), group.active_items.len(), |i, j| {
            self.p_tilde[(group.users[i], group.active_items[j])]
        })
    }

    /// Item similarity graph over the parent active set for one user
    /// component; returns the closure of the component's good items and the
    /// item-component map.
    fn item_closure(
        &self,
        sub: &DMatrix<f64>,
        members: &[usize],
        items: &[usize],
        group: &NiceGroup,
        threshold: f64,
    ) -> (Vec<usize>, HashMap<usize, usize>) {
        let n = group.active_items.len();
        let comps = graph::components(n, |a, b| {
            members
                .iter()
                .all(|&x| (sub[(x, a)] - sub[(x, b)]).abs() <= threshold)
        });
        let mut comp_of = vec![0; n];
        for (k, comp) in comps.iter().enumerate() {
            for &j in comp {
                comp_of[j] = k;
            }
        }
        let mut keep = vec![false; comps.len()];
        for &j in items {
            keep[comp_of[j]] = true;
        }
        let closed: Vec<usize> = (0..n)
            .filter(|&j| keep[comp_of[j]])
            .map(|j| group.active_items[j])
            .collect();
        let map = (0..n)
            .map(|j| (group.active_items[j], comp_of[j]))
            .collect();
        (closed, map)
    }

    fn exploit(
        &mut self,
        group: &mut NiceGroup,
        t: &mut usize,
        t_exploit: &mut usize,
        delta: f64,
        delta_next: f64,
        item_comp: Option<&HashMap<usize, usize>>,
    ) -> Result<Vec<Vec<usize>>> {
        let horizon = self.horizon();
        let budget = self.sim.instance().budget();
        let gap = self.cfg.gap_factor * self.clusters() * delta;
        let mut sets = Vec::new();
        while *t < horizon && !group.active_items.is_empty() {
            let rank = golden_rank(horizon, budget, *t_exploit).min(group.active_items.len());
            let mut triggered = false;
            let mut s: Vec<usize> = Vec::new();
            for &u in &group.users {
                let mut vals: Vec<f64> = group
                    .active_items
                    .iter()
                    .map(|&j| self.p_tilde[(u, j)])
                    .collect();
                vals.sort_by(|a, b| b.total_cmp(a));
                let top = vals[0];
                if top - vals[rank - 1] >= gap {
                    triggered = true;
                }
                for &j in &group.active_items {
                    if self.p_tilde[(u, j)] >= top - 2.0 * delta_next && !s.contains(&j) {
                        s.push(j);
                    }
                }
            }
            if !triggered {
                break;
            }
            if let Some(comp) = item_comp {
                let hit: Vec<usize> = s.iter().filter_map(|j| comp.get(j).copied()).collect();
                for &j in &group.active_items {
                    if !s.contains(&j) && comp.get(&j).is_some_and(|c| hit.contains(c)) {
                        s.push(j);
                    }
                }
            }
            // strongest items first, by mean estimate over the group
            let n_users = group.users.len() as f64;
            let score = |j: usize| {
                group
                    .users
                    .iter()
                    .map(|&u| self.p_tilde[(u, j)])
                    .sum::<f64>()
                    / n_users
            };
            s.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));

            let start = *t;
            'schedule: for &x in &s {
                for _ in 0..budget {
                    if *t >= horizon {
                        break 'schedule;
                    }
                    for &u in &group.users {
                        if !self.sim.is_blocked(u, x) {
                            self.sim.recommend(u, x, *t, Purpose::Exploit)?;
                        } else {
                            let y = self.substitute(u, &group.active_items, &s);
                            self.sim.recommend(u, y, *t, Purpose::ExploitFill)?;
                        }
                    }
                    *t += 1;
                }
            }
            *t_exploit += *t - start;
            group.active_items.retain(|j| !s.contains(j));
            group.chosen_golden.extend(s.iter().copied());
            sets.push(s);
        }
        Ok(sets)
    }

    /// Lowest-index unblocked active item outside `avoid`, then inside it,
    /// then any unblocked item at all.
    fn substitute(&self, u: usize, active: &[usize], avoid: &[usize]) -> usize {
        active
            .iter()
            .copied()
            .find(|&j| !avoid.contains(&j) && !self.sim.is_blocked(u, j))
            .or_else(|| active.iter().copied().find(|&j| !self.sim.is_blocked(u, j)))
            .or_else(|| self.sim.first_unblocked(u))
            .expect("N * B >= T leaves an unblocked item every round")
    }

    /// Best-estimated unblocked active item not in `omega_row`, falling back
    /// to any unblocked active item and then to any unblocked item.
    fn filler(&self, u: usize, active: &[usize], omega_row: &[bool]) -> usize {
        let mut best: Option<usize> = None;
        for (k, &j) in active.iter().enumerate() {
            if omega_row[k] || self.sim.is_blocked(u, j) {
                continue;
            }
            if best.is_none_or(|b| self.p_tilde[(u, j)] > self.p_tilde[(u, b)]) {
                best = Some(j);
            }
        }
        best.or_else(|| active.iter().copied().find(|&j| !self.sim.is_blocked(u, j)))
            .or_else(|| self.sim.first_unblocked(u))
            .expect("N * B >= T leaves an unblocked item every round")
    }

    fn explore(
        &mut self,
        group: &NiceGroup,
        t0: usize,
        p: f64,
        phase: usize,
    ) -> Result<(usize, usize)> {
        let horizon = self.horizon();
        let (nu, ni) = (group.users.len(), group.active_items.len());
        let mut mask_rng = rng::stream(
            self.seed,
            "explore-mask",
            &[phase as u64, group.users[0] as u64],
        );
        let mask: Vec<Vec<bool>> = (0..nu)
            .map(|_| (0..ni).map(|_| mask_rng.gen::<f64>() < p).collect())
            .collect();
        let m = mask
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .max()
            .unwrap_or(0);
        let end = (t0 + m).min(horizon);
        let est = self.sim.begin_estimate();
        let mut omega = Vec::new();
        let mut values = Vec::new();
        let mut dropped = 0;

        for (iu, &u) in group.users.iter().enumerate() {
            let targets: Vec<usize> = (0..ni).filter(|&k| mask[iu][k]).collect();
            for r in 0..(end - t0) {
                let t = t0 + r;
                let Some(&k) = targets.get(r) else {
                    let y = self.filler(u, &group.active_items, &mask[iu]);
                    self.sim.recommend(u, y, t, Purpose::ExploreFill)?;
                    continue;
                };
                let z = group.active_items[k];
                if !self.sim.is_blocked(u, z) {
                    let (e, reward) = self.sim.recommend(u, z, t, Purpose::Explore)?;
                    self.sim.consume(est, e, false);
                    omega.push((iu, k));
                    values.push(reward);
                    continue;
                }
                let y = self.filler(u, &group.active_items, &mask[iu]);
                self.sim.recommend(u, y, t, Purpose::ExploreFill)?;
                let reused = match self.reuse {
                    Reuse::Once => self.sim.take_pending(u, z),
                    Reuse::Unlimited => self.sim.last_observation(u, z),
                };
                match reused {
                    Some(e) => {
                        self.sim.consume(est, e, true);
                        omega.push((iu, k));
                        values.push(self.sim.event(e).reward);
                    }
                    None => dropped += 1,
                }
            }
        }

        if end < horizon && !omega.is_empty() {
            let prob = CompletionProblem::new(
                nu,
                ni,
                omega,
                values,
                self.sim.instance().clusters(),
                self.sigma,
            )?;
            let mut split_rng = rng::stream(
                self.seed,
                "estimate-split",
                &[phase as u64, group.users[0] as u64],
            );
            let rep = estimate(&prob, &self.cfg.solver, &mut split_rng)?;
            for (iu, &u) in group.users.iter().enumerate() {
                for (k, &j) in group.active_items.iter().enumerate() {
                    self.p_tilde[(u, j)] = rep.estimate[(iu, k)];
                }
            }
        }
        Ok((end, dropped))
    }

    /// Edge branch: each user gets its best-estimated unblocked active items
    /// until the horizon.
    fn edge_fill(&mut self, group: &NiceGroup, t0: usize) -> Result<()> {
        let horizon = self.horizon();
        let none = vec![false; group.active_items.len()];
        for &u in &group.users {
            for t in t0..horizon {
                let y = self.filler(u, &group.active_items, &none);
                self.sim.recommend(u, y, t, Purpose::EdgeFill)?;
            }
        }
        Ok(())
    }
}

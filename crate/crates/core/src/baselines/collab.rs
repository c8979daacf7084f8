use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Episode, Instance, Purpose, Simulation};
use crate::error::{Error, Result};
use crate::rng;

/// Collaborative-Greedy exploration exponents and neighbourhood rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollabConfig {
    /// Random exploration with probability `t^-theta` at round `t >= 1`.
    pub theta: f64,
    /// Joint exploration with probability `t^-alpha` otherwise.
    pub alpha: f64,
    /// Two users are neighbours when they agree on at least this fraction of
    /// their co-rated items.
    pub agreement: f64,
    pub min_overlap: usize,
}

impl Default for CollabConfig {
    fn default() -> Self {
        CollabConfig {
            theta: 0.5,
            alpha: 0.5,
            agreement: 0.5,
            min_overlap: 1,
        }
    }
}

impl CollabConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.alpha >= 0.0) {
            return Err(Error::config("theta and alpha must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.agreement) {
            return Err(Error::config("agreement must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Random-exploration probability at 1-based round `t`.
    pub fn explore_prob(&self, t: usize) -> f64 {
        (t.max(1) as f64).powf(-self.theta)
    }

    pub fn joint_prob(&self, t: usize) -> f64 {
        (t.max(1) as f64).powf(-self.alpha)
    }
}

/// Collaborative-Greedy: epsilon-greedy with random and joint exploration
/// and exploitation of the best like-rate among agreeing users.
///
/// A reward counts as a like when it exceeds the running mean of all
/// rewards observed before the current round (for +-1 feedback this is the
/// sign).
pub fn run_collab_greedy(inst: &Instance, cfg: &CollabConfig, seed: u64) -> Result<Episode> {
    cfg.validate()?;
    let (m, n, horizon) = (inst.users(), inst.items(), inst.horizon());
    let mut sim = Simulation::new(inst, seed);
    let mut joint: Vec<usize> = (0..n).collect();
    joint.shuffle(&mut rng::stream(seed, "collab-joint", &[]));

    // liked[u][j]: None if unrated
    let mut liked: Vec<Vec<Option<bool>>> = vec![vec![None; n]; m];
    let mut raters: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut overlap = vec![vec![0usize; m]; m];
    let mut agree = vec![vec![0usize; m]; m];
    let (mut sum, mut count) = (0.0, 0usize);
    let mut open = Vec::with_capacity(n);
    let mut score = vec![(0usize, 0usize); n];

    for t in 0..horizon {
        let threshold = if count > 0 { sum / count as f64 } else { 0.0 };
        let mut fresh = Vec::with_capacity(m);
        for u in 0..m {
            let mut rng = rng::stream(seed, "collab-policy", &[u as u64, t as u64]);
            open.clear();
            open.extend((0..n).filter(|&j| !sim.is_blocked(u, j)));
            let (j, purpose) = if rng.gen::<f64>() < cfg.explore_prob(t + 1) {
                (
                    *open.choose(&mut rng).expect("unblocked item"),
                    Purpose::Random,
                )
            } else if rng.gen::<f64>() < cfg.joint_prob(t + 1) {
                let j = joint
                    .iter()
                    .copied()
                    .find(|&j| !sim.is_blocked(u, j))
                    .expect("unblocked item");
                (j, Purpose::JointExplore)
            } else {
                score.iter_mut().for_each(|s| *s = (0, 0));
                for v in 0..m {
                    let is_nbr = v == u
                        || (overlap[u][v] >= cfg.min_overlap.max(1)
                            && agree[u][v] as f64 >= cfg.agreement * overlap[u][v] as f64);
                    if !is_nbr {
                        continue;
                    }
                    for (j, l) in liked[v].iter().enumerate() {
                        if let Some(l) = l {
                            score[j].0 += usize::from(*l);
                            score[j].1 += 1;
                        }
                    }
                }
                let best = open
                    .iter()
                    .copied()
                    .filter(|&j| score[j].1 > 0)
                    .max_by(|&a, &b| {
                        let ra = score[a].0 as f64 / score[a].1 as f64;
                        let rb = score[b].0 as f64 / score[b].1 as f64;
                        ra.total_cmp(&rb).then(b.cmp(&a))
                    });
                match best {
                    Some(j) => (j, Purpose::Exploit),
                    None => (
                        *open.choose(&mut rng).expect("unblocked item"),
                        Purpose::Random,
                    ),
                }
            };
            let (_, reward) = sim.recommend(u, j, t, purpose)?;
            fresh.push((u, j, reward));
        }
        for (u, j, reward) in fresh {
            let like = reward > threshold;
            if liked[u][j].is_none() {
                for &v in &raters[j] {
                    if v == u {
                        continue;
                    }
                    overlap[u][v] += 1;
                    overlap[v][u] += 1;
                    if liked[v][j] == Some(like) {
                        agree[u][v] += 1;
                        agree[v][u] += 1;
                    }
                }
                raters[j].push(u);
            }
            liked[u][j] = Some(like);
            sum += reward;
            count += 1;
        }
    }
    sim.into_episode()
}

use serde::{Deserialize, Serialize};

use crate::env::Instance;
use crate::error::{Error, Result};

/// Complete schedule of one run together with its regret curves.
///
/// `cumulative_regret[t]` compares the first `t + 1` rounds against the best
/// budget-feasible prefix of the same length (each user's items in decreasing
/// mean order, `B` times each). The last entry is the blocked regret.
/// `roundwise_mean_reward[t]` is the mean reward, averaged over users, of the
/// items recommended at round `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub users: usize,
    pub horizon: usize,
    /// `chosen[u * horizon + t]` is the item recommended to `u` at round `t`.
    pub chosen: Vec<usize>,
    /// Realised (noisy) rewards, same layout as `chosen`.
    pub rewards: Vec<f64>,
    pub roundwise_mean_reward: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
}

impl RegretTrace {
    pub fn new(inst: &Instance, chosen: &[Option<usize>], rewards: &[f64]) -> Result<Self> {
        let (m, t) = (inst.users(), inst.horizon());
        if chosen.len() != m * t || rewards.len() != m * t {
            return Err(Error::Protocol("schedule has the wrong shape".into()));
        }
        let mut items = Vec::with_capacity(m * t);
        for (slot, c) in chosen.iter().enumerate() {
            match c {
                Some(j) => items.push(*j),
                None => {
                    return Err(Error::IncompleteTrace {
                        user: slot / t,
                        round: slot % t,
                    })
                }
            }
        }
        let means = inst.mean_reward_matrix();
        let mut roundwise = vec![0.0; t];
        let mut cumulative = vec![0.0; t];
        for u in 0..m {
            let oracle = oracle_prefix(inst, u);
            let mut got = 0.0;
            for r in 0..t {
                let mean = means[(u, items[u * t + r])];
                got += mean;
                roundwise[r] += mean;
                cumulative[r] += oracle[r] - got;
            }
        }
        let scale = 1.0 / m as f64;
        roundwise.iter_mut().for_each(|x| *x *= scale);
        cumulative.iter_mut().for_each(|x| *x *= scale);
        Ok(RegretTrace {
            users: m,
            horizon: t,
            chosen: items,
            rewards: rewards.to_vec(),
            roundwise_mean_reward: roundwise,
            cumulative_regret: cumulative,
        })
    }

    pub fn item(&self, u: usize, round: usize) -> usize {
        self.chosen[u * self.horizon + round]
    }

    /// Final blocked regret.
    pub fn regret(&self) -> f64 {
        *self.cumulative_regret.last().unwrap_or(&0.0)
    }

    /// Mean over users of the total expected reward collected.
    pub fn total_mean_reward(&self) -> f64 {
        self.roundwise_mean_reward.iter().sum()
    }

    /// Largest number of times any single item went to any single user.
    pub fn max_repeats(&self) -> usize {
        let mut best = 0;
        for u in 0..self.users {
            let mut row: Vec<usize> =
                self.chosen[u * self.horizon..(u + 1) * self.horizon].to_vec();
            row.sort_unstable();
            let mut run = 0;
            for k in 0..row.len() {
                run = if k > 0 && row[k] == row[k - 1] {
                    run + 1
                } else {
                    1
                };
                best = best.max(run);
            }
        }
        best
    }
}

/// Best achievable cumulative mean reward of user `u` after each round: the
/// top items in decreasing order, each repeated `B` times.
pub fn oracle_prefix(inst: &Instance, u: usize) -> Vec<f64> {
    let order = ranked_items(inst, u);
    let means = inst.mean_reward_matrix();
    let b = inst.budget();
    let mut acc = 0.0;
    (0..inst.horizon())
        .map(|r| {
            acc += means[(u, order[r / b])];
            acc
        })
        .collect()
}

/// Items sorted by decreasing mean reward for user `u` (ties by index).
pub fn ranked_items(inst: &Instance, u: usize) -> Vec<usize> {
    let means = inst.mean_reward_matrix();
    let mut order: Vec<usize> = (0..inst.items()).collect();
    order.sort_by(|&a, &b| means[(u, b)].total_cmp(&means[(u, a)]).then(a.cmp(&b)));
    order
}

/// The user's top `ceil(T/B)` items (its golden items).
pub fn golden_items(inst: &Instance, u: usize) -> Vec<usize> {
    let k = inst.horizon().div_ceil(inst.budget());
    ranked_items(inst, u).into_iter().take(k).collect()
}

/// Blocked regret of a finished trace.
pub fn regret(trace: &RegretTrace) -> f64 {
    trace.regret()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::NoiseModel;
    use nalgebra::DMatrix;

    fn inst(rows: &[&[f64]], t: usize, b: usize) -> Instance {
        let m = rows.len();
        let n = rows[0].len();
        let p = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        Instance::new(
            p,
            (0..m).collect(),
            m,
            t,
            b,
            NoiseModel::Gaussian { sigma: 0.0 },
        )
        .unwrap()
    }

    fn trace(inst: &Instance, rows: &[&[usize]]) -> RegretTrace {
        let chosen: Vec<Option<usize>> = rows
            .iter()
            .flat_map(|r| r.iter().map(|&j| Some(j)))
            .collect();
        let rewards = vec![0.0; chosen.len()];
        RegretTrace::new(inst, &chosen, &rewards).unwrap()
    }

    #[test]
    fn forced_schedule_has_zero_regret() {
        let i = inst(&[&[1.0, 0.0]], 2, 1);
        assert_eq!(trace(&i, &[&[0, 1]]).regret(), 0.0);
        assert_eq!(trace(&i, &[&[1, 0]]).regret(), 0.0);
    }

    #[test]
    fn two_user_example() {
        let i = inst(&[&[1.0, 0.5, 0.0], &[0.2, 0.4, 0.6]], 2, 1);
        // sort-and-sum: user 0 oracle 1.5 got 1.5; user 1 oracle 1.0 got 0.6
        let tr = trace(&i, &[&[0, 1], &[0, 1]]);
        assert!((tr.regret() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn oracle_prefix_repeats_budget_times() {
        let i = inst(&[&[3.0, 2.0, 1.0]], 5, 2);
        assert_eq!(oracle_prefix(&i, 0), vec![3.0, 6.0, 8.0, 10.0, 11.0]);
        assert_eq!(golden_items(&i, 0), vec![0, 1, 2]);
    }

    #[test]
    fn incomplete_trace_errors() {
        let i = inst(&[&[1.0, 0.0]], 2, 1);
        let err = RegretTrace::new(&i, &[Some(0), None], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::IncompleteTrace { user: 0, round: 1 }));
    }

    #[test]
    fn repeats_are_counted() {
        let i = inst(&[&[1.0, 0.0]], 3, 2);
        assert_eq!(trace(&i, &[&[0, 1, 0]]).max_repeats(), 2);
    }
}

use rand::seq::SliceRandom;

use crate::env::{Episode, Instance, Purpose, Simulation};
use crate::error::Result;
use crate::harness::ranked_items;
use crate::rng;

/// Clairvoyant schedule: each user's golden items in decreasing mean
/// reward, each recommended `B` times in a row.
pub fn run_oracle(inst: &Instance) -> Result<Episode> {
    let mut sim = Simulation::new(inst, 0);
    let b = inst.budget();
    for u in 0..inst.users() {
        let order = ranked_items(inst, u);
        for t in 0..inst.horizon() {
            sim.recommend(u, order[t / b], t, Purpose::Oracle)?;
        }
    }
    sim.into_episode()
}

/// Recommends a uniformly random unblocked item to every user each round.
pub fn run_random(inst: &Instance, seed: u64) -> Result<Episode> {
    let mut sim = Simulation::new(inst, seed);
    let mut open: Vec<usize> = Vec::with_capacity(inst.items());
    for u in 0..inst.users() {
        let mut rng = rng::stream(seed, "random-policy", &[u as u64]);
        for t in 0..inst.horizon() {
            open.clear();
            open.extend((0..inst.items()).filter(|&j| !sim.is_blocked(u, j)));
            let j = *open
                .choose(&mut rng)
                .expect("N * B >= T leaves an unblocked item");
            sim.recommend(u, j, t, Purpose::Random)?;
        }
    }
    sim.into_episode()
}

/// Best total mean reward over all budget-respecting schedules, summed over
/// users, by exhaustive search. Users do not interact, so each is searched alone.
/// Exponential in `T`; meant for tiny instances.
pub fn brute_force_best(inst: &Instance) -> f64 {
    fn search(row: &[f64], left: usize, counts: &mut [usize], budget: usize) -> f64 {
        if left == 0 {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..row.len() {
            if counts[j] < budget {
                counts[j] += 1;
                best = best.max(row[j] + search(row, left - 1, counts, budget));
                counts[j] -= 1;
            }
        }
        best
    }
    let means = inst.mean_reward_matrix();
    (0..inst.users())
        .map(|u| {
            let row: Vec<f64> = means.row(u).iter().copied().collect();
            let mut counts = vec![0; row.len()];
            search(&row, inst.horizon(), &mut counts, inst.budget())
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::NoiseModel;
    use nalgebra::DMatrix;

    fn row_instance(values: &[f64], horizon: usize, budget: usize) -> Instance {
        let p = DMatrix::from_row_slice(1, values.len(), values);
        Instance::new(
            p,
            vec![0],
            1,
            horizon,
            budget,
            NoiseModel::Gaussian { sigma: 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn oracle_has_zero_regret() {
        let inst = row_instance(&[0.2, 0.9, 0.5, 0.7], 3, 2);
        let ep = run_oracle(&inst).unwrap();
        assert_eq!(ep.trace.regret(), 0.0);
        assert_eq!(ep.trace.item(0, 0), 1);
        assert_eq!(ep.trace.item(0, 1), 1);
        assert_eq!(ep.trace.item(0, 2), 3);
    }

    #[test]
    fn random_on_constant_matrix_has_zero_regret() {
        let inst = row_instance(&[0.4; 5], 4, 1);
        let ep = run_random(&inst, 3).unwrap();
        assert!(ep.trace.regret().abs() < 1e-12);
        assert_eq!(ep.trace.max_repeats(), 1);
    }

    #[test]
    fn random_expected_regret_matches_enumeration() {
        // six equally likely ordered pairs of distinct items; best total is 5
        let inst = row_instance(&[3.0, 2.0, 1.0], 2, 1);
        let pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
        let vals = [3.0, 2.0, 1.0];
        let expected = pairs
            .iter()
            .map(|&(a, b)| 5.0 - vals[a] - vals[b])
            .sum::<f64>()
            / 6.0;
        assert!((expected - 1.0).abs() < 1e-12);
        let n = 6000;
        let mean = (0..n)
            .map(|s| run_random(&inst, s).unwrap().trace.regret())
            .sum::<f64>()
            / n as f64;
        assert!((mean - expected).abs() < 0.05, "{mean}");
    }

    #[test]
    fn brute_force_agrees_on_a_hand_example() {
        let inst = row_instance(&[1.0, 3.0, 2.0], 3, 2);
        assert_eq!(brute_force_best(&inst), 8.0);
    }
}

use nalgebra::DMatrix;
use rand::Rng;

use super::solver::{solve_block, CompletionProblem, SolverConfig};
use crate::error::Result;
use crate::par;

/// Result of [`estimate`].
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub estimate: DMatrix<f64>,
    /// Number of groups the longer dimension was split into.
    pub groups: usize,
    /// Groups that had no observation and were filled with zeros.
    pub empty_blocks: Vec<usize>,
    /// Groups whose solve hit the iteration cap.
    pub unconverged_blocks: Vec<usize>,
}

/// `ceil(max / min)` for the block split of an `n x m` matrix.
pub fn group_count(nrows: usize, ncols: usize) -> usize {
    let (lo, hi) = (nrows.min(ncols), nrows.max(ncols));
    if lo == 0 {
        return 1;
    }
    hi.div_ceil(lo)
}

/// Completes `prob` by splitting its longer dimension into
/// `ceil(max / min)` uniformly random groups and solving each roughly square
/// block separately.
pub fn estimate<R: Rng + ?Sized>(
    prob: &CompletionProblem,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<EstimateReport> {
    prob.validate()?;
    cfg.validate()?;
    let (n, m) = (prob.nrows, prob.ncols);
    let by_cols = n <= m;
    let long = if by_cols { m } else { n };
    let k = group_count(n, m);

    let zeta: Vec<usize> = if k == 1 {
        vec![0; long]
    } else {
        (0..long).map(|_| rng.gen_range(0..k)).collect()
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut local = vec![0; long];
    for (idx, &g) in zeta.iter().enumerate() {
        local[idx] = members[g].len();
        members[g].push(idx);
    }

    let mut blocks: Vec<(usize, CompletionProblem)> = Vec::new();
    let mut empty = Vec::new();
    let mut omegas: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&(i, j), &v) in prob.omega.iter().zip(&prob.values) {
        let (g, entry) = if by_cols {
            (zeta[j], (i, local[j]))
        } else {
            (zeta[i], (local[i], j))
        };
        omegas[g].push(entry);
        values[g].push(v);
    }
    for g in 0..k {
        if members[g].is_empty() {
            continue;
        }
        if omegas[g].is_empty() {
            empty.push(g);
            continue;
        }
        let (bn, bm) = if by_cols {
            (n, members[g].len())
        } else {
            (members[g].len(), m)
        };
        blocks.push((
            g,
            CompletionProblem {
                nrows: bn,
                ncols: bm,
                omega: std::mem::take(&mut omegas[g]),
                values: std::mem::take(&mut values[g]),
                rank: prob.rank,
                sigma: prob.sigma,
            },
        ));
    }

    let solved = par::map(&blocks, |(_, p)| solve_block(p, cfg));
    let mut out = DMatrix::zeros(n, m);
    let mut unconverged = Vec::new();
    for ((g, _), rep) in blocks.iter().zip(solved) {
        let rep = rep?;
        if !rep.converged {
            unconverged.push(*g);
        }
        for (lidx, &gidx) in members[*g].iter().enumerate() {
            if by_cols {
                out.set_column(gidx, &rep.estimate.column(lidx));
            } else {
                out.set_row(gidx, &rep.estimate.row(lidx));
            }
        }
    }
    if !empty.is_empty() {
        log::debug!("{} completion blocks had no observations", empty.len());
    }
    Ok(EstimateReport {
        estimate: out,
        groups: k,
        empty_blocks: empty,
        unconverged_blocks: unconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn group_counts() {
        assert_eq!(group_count(4, 10), 3);
        assert_eq!(group_count(10, 4), 3);
        assert_eq!(group_count(7, 7), 1);
        assert_eq!(group_count(5, 6), 2);
    }

    #[test]
    fn square_input_is_one_block() {
        let z = DMatrix::from_fn(5, 5, |i, j| (i + 1) as f64 * (j as f64 - 2.0));
        let prob = CompletionProblem::full(&z, 1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = estimate(&prob, &SolverConfig::default(), &mut rng).unwrap();
        assert_eq!(rep.groups, 1);
        assert!((rep.estimate - z).amax() < 1e-6);
    }

    #[test]
    fn rectangular_full_observation_is_reassembled() {
        let z = DMatrix::from_fn(4, 10, |i, j| (i as f64 - 1.5) * (j as f64 * 0.3 + 1.0));
        let prob = CompletionProblem::full(&z, 1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rep = estimate(&prob, &SolverConfig::default(), &mut rng).unwrap();
        assert_eq!(rep.groups, 3);
        assert!((rep.estimate - z.clone()).amax() < 1e-6);
        let tall = CompletionProblem::full(&z.transpose(), 1, 0.0);
        let rep = estimate(&tall, &SolverConfig::default(), &mut rng).unwrap();
        assert!((rep.estimate - z.transpose()).amax() < 1e-6);
    }

    #[test]
    fn unobserved_columns_stay_zero() {
        // 1 x 3 is split into three column groups; only column 0 is observed.
        let prob = CompletionProblem::new(1, 3, vec![(0, 0)], vec![2.0], 1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = estimate(&prob, &SolverConfig::default(), &mut rng).unwrap();
        assert_eq!(rep.estimate[(0, 1)], 0.0);
        assert_eq!(rep.estimate[(0, 2)], 0.0);
    }
}

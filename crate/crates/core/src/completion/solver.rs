use nalgebra::{DMatrix, Dyn, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed entries of a low-rank matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionProblem {
    pub nrows: usize,
    pub ncols: usize,
    /// Observed `(row, col)` positions, without duplicates.
    pub omega: Vec<(usize, usize)>,
    /// `values[k]` is the observation at `omega[k]`.
    pub values: Vec<f64>,
    pub rank: usize,
    pub sigma: f64,
}

impl CompletionProblem {
    pub fn new(
        nrows: usize,
        ncols: usize,
        omega: Vec<(usize, usize)>,
        values: Vec<f64>,
        rank: usize,
        sigma: f64,
    ) -> Result<Self> {
        let prob = CompletionProblem {
            nrows,
            ncols,
            omega,
            values,
            rank,
            sigma,
        };
        prob.validate()?;
        Ok(prob)
    }

    /// Every entry of `z` observed.
    pub fn full(z: &DMatrix<f64>, rank: usize, sigma: f64) -> Self {
        let (n, m) = z.shape();
        let mut omega = Vec::with_capacity(n * m);
        let mut values = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                omega.push((i, j));
                values.push(z[(i, j)]);
            }
        }
        CompletionProblem {
            nrows: n,
            ncols: m,
            omega,
            values,
            rank,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() != self.values.len() {
            return Err(Error::config("omega and values differ in length"));
        }
        if self.rank == 0 {
            return Err(Error::config("rank bound must be at least 1"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config("noise scale must be non-negative"));
        }
        let mut seen = vec![false; self.nrows * self.ncols];
        for &(i, j) in &self.omega {
            if i >= self.nrows || j >= self.ncols {
                return Err(Error::config(format!(
                    "observed index ({i}, {j}) outside {} x {}",
                    self.nrows, self.ncols
                )));
            }
            let k = i * self.ncols + j;
            if seen[k] {
                return Err(Error::config(format!("index ({i}, {j}) observed twice")));
            }
            seen[k] = true;
        }
        Ok(())
    }

    pub fn is_fully_observed(&self) -> bool {
        self.omega.len() == self.nrows * self.ncols
    }

    fn mask_and_fill(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut mask = DMatrix::zeros(self.nrows, self.ncols);
        let mut z = DMatrix::zeros(self.nrows, self.ncols);
        for (&(i, j), &v) in self.omega.iter().zip(&self.values) {
            mask[(i, j)] = 1.0;
            z[(i, j)] = v;
        }
        (mask, z)
    }
}

/// Settings of the proximal-gradient solver.
///
/// The regulariser is `lambda = c_lambda * sigma_eff * sqrt(|omega| / max(n, m))`.
/// When some entries are unobserved, `sigma_eff` is at least
/// `sigma_floor * max|Z|`: with no noise and no regularisation the program
/// has no unique minimiser off the observed set, and a small positive weight
/// selects the minimum-nuclear-norm completion instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub c_lambda: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub step: f64,
    pub sigma_floor: f64,
    /// Solve a decreasing sequence of regularisers, warm-starting each stage
    /// from the previous solution, before the target one.
    pub continuation: bool,
    /// Momentum steps with restart whenever the objective would increase;
    /// the accepted objective is still non-increasing.
    pub accelerated: bool,
    /// Record the objective after every iteration of the final stage.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c_lambda: 2.0,
            tol: 1e-8,
            max_iters: 2000,
            step: 1.0,
            sigma_floor: 1e-5,
            continuation: true,
            accelerated: true,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("solver tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver max_iters must be at least 1"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::config("solver step must lie in (0, 1]"));
        }
        if !(self.c_lambda >= 0.0) || !(self.sigma_floor >= 0.0) {
            return Err(Error::config(
                "c_lambda and sigma_floor must be non-negative",
            ));
        }
        Ok(())
    }

    /// Regulariser weight used for `prob`.
    pub fn lambda_for(&self, prob: &CompletionProblem) -> f64 {
        let mut sigma = prob.sigma;
        if !prob.is_fully_observed() {
            let zmax = prob.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            sigma = sigma.max(self.sigma_floor * zmax);
        }
        let scale = (prob.omega.len() as f64 / prob.nrows.max(prob.ncols) as f64).sqrt();
        self.c_lambda * sigma * scale
    }
}

/// Solver output.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub estimate: DMatrix<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    /// `false` when `max_iters` was hit before the tolerance.
    pub converged: bool,
    /// Objective per iteration of the final stage (empty unless requested).
    pub history: Vec<f64>,
    /// Singular values of the estimate above `1e-8`.
    pub rank: usize,
}

/// `1/2 sum_omega (Q - Z)^2 + lambda ||Q||_*`.
pub fn objective(prob: &CompletionProblem, q: &DMatrix<f64>, lambda: f64) -> f64 {
    let fit: f64 = prob
        .omega
        .iter()
        .zip(&prob.values)
        .map(|(&(i, j), &z)| (q[(i, j)] - z).powi(2))
        .sum();
    let nuc = if lambda > 0.0 {
        singular_values(q).iter().sum()
    } else {
        0.0
    };
    0.5 * fit + lambda * nuc
}

const MAX_SWEEPS: usize = 10_000;

/// Sets entries below `f64::EPSILON` times the largest magnitude to zero.
fn flush_negligible(m: &mut DMatrix<f64>) {
    let cut = m.amax() * f64::EPSILON;
    m.apply(|x| {
        if x.abs() < cut {
            *x = 0.0;
        }
    });
}

/// Eigendecomposition of a symmetric matrix with a bounded number of QR
/// sweeps, retried once with negligible entries flushed.
fn symmetric_eigen(mut g: DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    if let Some(e) = g.clone().try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS) {
        return e;
    }
    flush_negligible(&mut g);
    g.symmetric_eigen()
}

/// Singular values, unordered. Falls back to the square roots of the
/// smaller Gram matrix's eigenvalues when the bidiagonal SVD fails to
/// converge or returns a non-finite value, which it can on mostly-zero
/// matrices with entries spanning hundreds of orders of magnitude.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    if let Some(svd) = SVD::try_new_unordered(m.clone(), false, false, f64::EPSILON, MAX_SWEEPS) {
        if svd.singular_values.iter().all(|s| s.is_finite()) {
            return svd.singular_values.iter().copied().collect();
        }
    }
    let gram = if m.nrows() < m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    symmetric_eigen(gram)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Singular-value soft-thresholding. Returns the thresholded matrix and its
/// nuclear norm.
///
/// The singular pairs come from the eigendecomposition of the smaller Gram
/// matrix, so with `V` the right singular vectors the result is
/// `G V diag(max(0, 1 - threshold / s)) V^T` (or the transposed form).
/// Pairs whose singular value is below the threshold never need the left
/// vectors, which keeps the small, inaccurate ones harmless.
pub fn svt(g: DMatrix<f64>, threshold: f64) -> (DMatrix<f64>, f64) {
    let (n, m) = g.shape();
    if n == 0 || m == 0 {
        return (g, 0.0);
    }
    if threshold <= 0.0 {
        let nuc = singular_values(&g).iter().sum();
        return (g, nuc);
    }
    let wide = n < m;
    let gram = if wide {
        &g * g.transpose()
    } else {
        g.transpose() * &g
    };
    let eig = symmetric_eigen(gram);
    let k = eig.eigenvalues.len();
    let mut weights = Vec::new();
    let mut cols = Vec::new();
    let mut nuc = 0.0;
    for i in 0..k {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        if s > threshold {
            nuc += s - threshold;
            weights.push(1.0 - threshold / s);
            cols.push(i);
        }
    }
    if cols.is_empty() {
        return (DMatrix::zeros(n, m), 0.0);
    }
    let basis = eig.eigenvectors.select_columns(&cols);
    let mut scaled = basis.clone();
    for (c, w) in weights.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*w);
    }
    let mut out = if wide {
        // G^T side: Q = B diag(w) B^T G
        &scaled * (basis.transpose() * &g)
    } else {
        (&g * &scaled) * basis.transpose()
    };
    flush_negligible(&mut out);
    (out, nuc)
}

fn fit_term(prob: &CompletionProblem, q: &DMatrix<f64>) -> f64 {
    0.5 * prob
        .omega
        .iter()
        .zip(&prob.values)
        .map(|(&(i, j), &z)| (q[(i, j)] - z).powi(2))
        .sum::<f64>()
}

struct Stage {
    q: DMatrix<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    prob: &CompletionProblem,
    mask: &DMatrix<f64>,
    z: &DMatrix<f64>,
    q0: DMatrix<f64>,
    lambda: f64,
    cfg: &SolverConfig,
    tol: f64,
    iters: usize,
    mut history: Option<&mut Vec<f64>>,
) -> Stage {
    let step = cfg.step;
    let mut x = q0;
    let mut fx = objective(prob, &x, lambda);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    for it in 1..=iters {
        let grad = (&y - z).component_mul(mask);
        let (cand, nuc) = svt(&y - grad * step, lambda * step);
        let fc = fit_term(prob, &cand) + lambda * nuc;
        let accepted = fc <= fx;
        let prev = fx;
        if cfg.accelerated {
            if accepted {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                y = &cand + (&cand - &x) * ((momentum - 1.0) / next);
                momentum = next;
                x = cand;
                fx = fc;
            } else {
                // restart from the last accepted point
                y = x.clone();
                momentum = 1.0;
            }
        } else {
            debug_assert!(
                fc <= fx + 1e-9 * fx.abs().max(1.0),
                "objective increased from {fx} to {fc}"
            );
            x = cand;
            fx = fc;
            y = x.clone();
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(fx);
        }
        let change = (prev - fx).abs() / prev.abs().max(1e-300);
        if (accepted || !cfg.accelerated) && (change < tol || fx == 0.0) {
            return Stage {
                q: x,
                objective: fx,
                iterations: it,
                converged: true,
            };
        }
    }
    Stage {
        q: x,
        objective: fx,
        iterations: iters,
        converged: false,
    }
}

/// Minimises `1/2 sum_omega (Q - Z)^2 + lambda ||Q||_*` by proximal gradient
/// with singular-value thresholding, starting from zero.
pub fn solve_with_lambda(
    prob: &CompletionProblem,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    prob.validate()?;
    cfg.validate()?;
    let (mask, z) = prob.mask_and_fill();
    let mut q = DMatrix::zeros(prob.nrows, prob.ncols);
    let mut iterations = 0;

    if cfg.continuation && !prob.omega.is_empty() {
        // Above the spectral norm of the observed data the solution is zero.
        let top = singular_values(&z).iter().fold(0.0f64, |a, &b| a.max(b));
        let mut stage_lambda = 0.5 * top;
        let floor = lambda.max(1e-12 * top);
        while stage_lambda > 2.0 * floor && iterations < cfg.max_iters {
            let budget = (cfg.max_iters - iterations).min(cfg.max_iters / 4).max(1);
            let st = run_stage(prob, &mask, &z, q, stage_lambda, cfg, 1e-4, budget, None);
            q = st.q;
            iterations += st.iterations;
            stage_lambda *= 0.5;
        }
    }

    let mut history = Vec::new();
    let remaining = cfg.max_iters.saturating_sub(iterations).max(1);
    let hist = cfg.record_history.then_some(&mut history);
    let st = run_stage(prob, &mask, &z, q, lambda, cfg, cfg.tol, remaining, hist);
    iterations += st.iterations;
    if !st.converged {
        log::warn!(
            "completion solver stopped at max_iters = {} ({}x{}, |omega| = {})",
            cfg.max_iters,
            prob.nrows,
            prob.ncols,
            prob.omega.len()
        );
    }
    let rank = singular_values(&st.q).iter().filter(|&&s| s > 1e-8).count();
    Ok(SolveReport {
        estimate: st.q,
        lambda,
        objective: st.objective,
        iterations,
        converged: st.converged,
        history,
        rank,
    })
}

/// Solves one block with the configured regulariser.
pub fn solve_block(prob: &CompletionProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    if prob.omega.is_empty() {
        return Err(Error::config(
            "cannot complete a block with no observations",
        ));
    }
    solve_with_lambda(prob, cfg.lambda_for(prob), cfg)
}

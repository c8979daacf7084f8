//! Noisy low-rank matrix completion by nuclear-norm regularised least
//! squares, and structural diagnostics of clustered reward matrices.

mod diagnostics;
mod estimate;
mod solver;

pub use diagnostics::{diagnostics, distinct_rows, subset_spot_check, Diagnostics};
pub use estimate::{estimate, group_count, EstimateReport};
pub use solver::{
    objective, singular_values, solve_block, solve_with_lambda, svt, CompletionProblem,
    SolveReport, SolverConfig,
};

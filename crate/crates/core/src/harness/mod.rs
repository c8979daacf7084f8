//! Regret computation, experiment orchestration and aggregation.

mod algorithm;
mod report;
mod sweep;
mod trace;

pub use algorithm::Algorithm;
pub use report::{aggregate, write_csv, CellSummary, Failure, Stats, SweepReport, CSV_HEADER};
pub use sweep::{instance_seed, policy_seed, sweep, CellResult, CellRun, SweepSpec};
pub use trace::{golden_items, oracle_prefix, ranked_items, regret, RegretTrace};

//! Reference policies: explore-then-commit, PB-LATTICE, Collaborative-Greedy,
//! the clairvoyant oracle and uniform random.

mod collab;
mod etc;
pub mod kmeans;
mod oracle;
mod pblattice;

pub use collab::{run_collab_greedy, CollabConfig};
pub use etc::{etc_probability, run_etc, EtcConfig, Exploration};
pub use kmeans::{elbow, kmeans, KMeansConfig, KMeansFit};
pub use oracle::{brute_force_best, run_oracle, run_random};
pub use pblattice::{
    run_pblattice, PbGroupRecord, PbLatticeConfig, PbLatticeRun, PbPhaseRecord, PivotRule,
};

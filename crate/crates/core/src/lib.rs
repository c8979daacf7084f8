//! Blocked collaborative bandits.
//!
//! `M` users are recommended one item per round for `T` rounds, no item more
//! than `B` times to the same user. Users fall into `C` latent clusters that
//! share an expected-reward row, so the reward matrix has rank at most `C`.
//!
//! The crate provides the environment ([`env`]), a nuclear-norm matrix
//! completion solver ([`completion`]), the phased B-LATTICE policy
//! ([`blattice`]), its user-and-item-cluster variant ([`bbuic`]), reference
//! policies ([`baselines`]) and a regret harness with seed sweeps
//! ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bbuic;
pub mod blattice;
pub mod completion;
pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod par;
pub mod rng;

pub use error::{Error, Result};

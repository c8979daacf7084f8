//! Synthetic instances, the blocking ledger and the round-by-round protocol.

mod instance;
mod ledger;
mod sim;

pub use instance::{
    generate_instance, generate_separated, Dataset, EntryLaw, GeneratorSpec, Instance, InstanceDoc,
    NoiseModel,
};
pub use ledger::BlockingLedger;
pub use sim::{Consumption, Episode, Event, EventLog, Purpose, Simulation};

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{BlockingLedger, Instance};
use crate::error::{Error, Result};
use crate::harness::RegretTrace;
use crate::rng;

/// Why a recommendation was made. Explore recommendations feed an estimate
/// immediately (they count towards `K`); everything else is stored as an
/// unused observation (`L`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Explore,
    ExploreFill,
    Exploit,
    ExploitFill,
    EdgeFill,
    Commit,
    JointExplore,
    Random,
    Oracle,
}

impl Purpose {
    pub fn consumable(self) -> bool {
        matches!(self, Purpose::Explore)
    }
}

/// One recommendation and the reward it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub round: usize,
    pub user: usize,
    pub item: usize,
    pub purpose: Purpose,
    pub reward: f64,
}

/// An observation handed to an estimate call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consumption {
    pub estimate: usize,
    pub event: usize,
    /// The observation was recorded earlier and is being reused.
    pub reused: bool,
}

/// A finished run: regret trace, recommendation log and final ledger.
#[derive(Clone, Debug)]
pub struct Episode {
    pub trace: RegretTrace,
    pub log: EventLog,
    pub ledger: BlockingLedger,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub consumptions: Vec<Consumption>,
}

impl EventLog {
    /// Writes one JSON object per recommendation.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// How many times each event was fed to an estimate.
    pub fn consumption_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.events.len()];
        for c in &self.consumptions {
            counts[c.event] += 1;
        }
        counts
    }
}

/// Round-by-round protocol state of one run: the budget ledger, the
/// per-(user, round) schedule and the event log.
///
/// Reward noise for user `u` at round `t` comes from the stream
/// `(seed, "noise", u, t)`, so two policies run with the same seed see
/// identical noise whenever they recommend the same item.
pub struct Simulation<'a> {
    inst: &'a Instance,
    ledger: BlockingLedger,
    chosen: Vec<Option<usize>>,
    rewards: Vec<f64>,
    log: EventLog,
    last_event: HashMap<(usize, usize), usize>,
    noise_seed: u64,
    estimates: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(inst: &'a Instance, seed: u64) -> Self {
        let (m, t) = (inst.users(), inst.horizon());
        Simulation {
            inst,
            ledger: BlockingLedger::new(m, inst.items(), inst.budget()),
            chosen: vec![None; m * t],
            rewards: vec![0.0; m * t],
            log: EventLog::default(),
            last_event: HashMap::new(),
            noise_seed: seed,
            estimates: 0,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn ledger(&self) -> &BlockingLedger {
        &self.ledger
    }

    pub fn horizon(&self) -> usize {
        self.inst.horizon()
    }

    pub fn is_blocked(&self, u: usize, j: usize) -> bool {
        self.ledger.is_blocked(u, j)
    }

    pub fn chosen(&self, u: usize, round: usize) -> Option<usize> {
        self.chosen[u * self.inst.horizon() + round]
    }

    pub fn events(&self) -> &[Event] {
        &self.log.events
    }

    pub fn event(&self, idx: usize) -> &Event {
        &self.log.events[idx]
    }

    /// Recommends `item` to `user` at `round`. Returns the event index and
    /// the observed reward.
    pub fn recommend(
        &mut self,
        user: usize,
        item: usize,
        round: usize,
        purpose: Purpose,
    ) -> Result<(usize, f64)> {
        let horizon = self.inst.horizon();
        if round >= horizon {
            return Err(Error::Protocol(format!(
                "round {round} is past the horizon {horizon}"
            )));
        }
        if item >= self.inst.items() || user >= self.inst.users() {
            return Err(Error::Protocol(format!(
                "no such user/item ({user}, {item})"
            )));
        }
        let slot = user * horizon + round;
        if let Some(prev) = self.chosen[slot] {
            return Err(Error::Protocol(format!(
                "user {user} already received item {prev} at round {round}"
            )));
        }
        let event = self.log.events.len();
        if purpose.consumable() {
            self.ledger.record_consumed(user, item)?;
        } else {
            self.ledger.record_pending(user, item, event)?;
        }
        let mut noise = rng::stream(self.noise_seed, "noise", &[user as u64, round as u64]);
        let reward = self.inst.sample_reward(user, item, &mut noise);
        self.chosen[slot] = Some(item);
        self.rewards[slot] = reward;
        self.log.events.push(Event {
            round,
            user,
            item,
            purpose,
            reward,
        });
        self.last_event.insert((user, item), event);
        Ok((event, reward))
    }

    /// Opens a new estimate call and returns its id.
    pub fn begin_estimate(&mut self) -> usize {
        self.estimates += 1;
        self.estimates - 1
    }

    /// Marks event `event` as fed to estimate `estimate`.
    pub fn consume(&mut self, estimate: usize, event: usize, reused: bool) {
        self.log.consumptions.push(Consumption {
            estimate,
            event,
            reused,
        });
    }

    /// Takes an unused stored observation of `(u, j)` (moving one count from
    /// `L` to `K`) and returns its event index.
    pub fn take_pending(&mut self, u: usize, j: usize) -> Option<usize> {
        self.ledger.take_pending(u, j)
    }

    /// Most recent observation of `(u, j)`, used or not.
    pub fn last_observation(&self, u: usize, j: usize) -> Option<usize> {
        self.last_event.get(&(u, j)).copied()
    }

    /// Lowest-index item that is still unblocked for `u`.
    pub fn first_unblocked(&self, u: usize) -> Option<usize> {
        (0..self.inst.items()).find(|&j| !self.ledger.is_blocked(u, j))
    }

    /// Finishes the run: checks the schedule is complete and computes the
    /// regret trace.
    pub fn finish(self) -> Result<(RegretTrace, EventLog, BlockingLedger)> {
        let trace = RegretTrace::new(self.inst, &self.chosen, &self.rewards)?;
        Ok((trace, self.log, self.ledger))
    }

    /// [`Simulation::finish`] packed into an [`Episode`].
    pub fn into_episode(self) -> Result<Episode> {
        let (trace, log, ledger) = self.finish()?;
        Ok(Episode { trace, log, ledger })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::NoiseModel;
    use nalgebra::DMatrix;

    fn tiny(budget: usize) -> Instance {
        let p = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.0, 1.0, 0.5, 0.0]);
        Instance::new(
            p,
            vec![0, 0],
            1,
            2,
            budget,
            NoiseModel::Gaussian { sigma: 0.3 },
        )
        .unwrap()
    }

    #[test]
    fn recommend_updates_ledger_and_log() {
        let inst = tiny(2);
        let mut sim = Simulation::new(&inst, 1);
        let (e0, _) = sim.recommend(0, 1, 0, Purpose::Explore).unwrap();
        let (e1, _) = sim.recommend(0, 1, 1, Purpose::Exploit).unwrap();
        assert_eq!((e0, e1), (0, 1));
        assert_eq!(sim.ledger().k(0, 1), 1);
        assert_eq!(sim.ledger().l(0, 1), 1);
        assert!(sim.is_blocked(0, 1));
        assert!(sim.recommend(1, 1, 0, Purpose::Random).is_ok());
        // same slot twice is a protocol error
        assert!(matches!(
            sim.recommend(1, 2, 0, Purpose::Random),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn budget_violation_is_reported() {
        let inst = tiny(1);
        let mut sim = Simulation::new(&inst, 1);
        sim.recommend(0, 0, 0, Purpose::Random).unwrap();
        assert!(matches!(
            sim.recommend(0, 0, 1, Purpose::Random),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn noise_depends_only_on_user_and_round() {
        let inst = tiny(2);
        let mut a = Simulation::new(&inst, 5);
        let mut b = Simulation::new(&inst, 5);
        let (_, ra) = a.recommend(1, 0, 1, Purpose::Random).unwrap();
        b.recommend(0, 2, 0, Purpose::Random).unwrap();
        let (_, rb) = b.recommend(1, 0, 1, Purpose::Random).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn incomplete_schedule_is_rejected() {
        let inst = tiny(2);
        let mut sim = Simulation::new(&inst, 0);
        sim.recommend(0, 0, 0, Purpose::Random).unwrap();
        assert!(matches!(sim.finish(), Err(Error::IncompleteTrace { .. })));
    }
}

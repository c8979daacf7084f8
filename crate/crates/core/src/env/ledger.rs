use std::collections::HashMap;

use crate::error::{Error, Result};

/// Per-(user, item) recommendation counters enforcing the budget `B`.
///
/// `K` counts recommendations whose observation has been fed to an estimate;
/// `L` counts recommendations whose observation is still unused. Unused
/// observations are kept (as event indices) so a later explore step can
/// consume them instead of re-recommending a blocked item.
#[derive(Clone, Debug)]
pub struct BlockingLedger {
    users: usize,
    items: usize,
    budget: u32,
    k: Vec<u32>,
    l: Vec<u32>,
    pending: HashMap<(usize, usize), Vec<usize>>,
}

impl BlockingLedger {
    pub fn new(users: usize, items: usize, budget: usize) -> Self {
        BlockingLedger {
            users,
            items,
            budget: budget as u32,
            k: vec![0; users * items],
            l: vec![0; users * items],
            pending: HashMap::new(),
        }
    }

    #[inline]
    fn idx(&self, u: usize, j: usize) -> usize {
        debug_assert!(u < self.users && j < self.items);
        u * self.items + j
    }

    pub fn budget(&self) -> usize {
        self.budget as usize
    }

    pub fn k(&self, u: usize, j: usize) -> u32 {
        self.k[self.idx(u, j)]
    }

    pub fn l(&self, u: usize, j: usize) -> u32 {
        self.l[self.idx(u, j)]
    }

    /// Total recommendations of `j` to `u` so far.
    pub fn count(&self, u: usize, j: usize) -> u32 {
        let i = self.idx(u, j);
        self.k[i] + self.l[i]
    }

    pub fn is_blocked(&self, u: usize, j: usize) -> bool {
        self.count(u, j) >= self.budget
    }

    pub fn remaining(&self, u: usize, j: usize) -> u32 {
        self.budget.saturating_sub(self.count(u, j))
    }

    fn check(&self, u: usize, j: usize) -> Result<()> {
        let count = self.count(u, j);
        if count >= self.budget {
            return Err(Error::Budget {
                user: u,
                item: j,
                count,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Records a recommendation whose observation is consumed right away.
    pub fn record_consumed(&mut self, u: usize, j: usize) -> Result<()> {
        self.check(u, j)?;
        let i = self.idx(u, j);
        self.k[i] += 1;
        Ok(())
    }

    /// Records a recommendation whose observation (event `event`) is kept
    /// for later reuse.
    pub fn record_pending(&mut self, u: usize, j: usize, event: usize) -> Result<()> {
        self.check(u, j)?;
        let i = self.idx(u, j);
        self.l[i] += 1;
        self.pending.entry((u, j)).or_default().push(event);
        Ok(())
    }

    /// Hands out the most recent unused observation of `(u, j)`, moving one
    /// count from `L` to `K`.
    pub fn take_pending(&mut self, u: usize, j: usize) -> Option<usize> {
        let stack = self.pending.get_mut(&(u, j))?;
        let event = stack.pop()?;
        if stack.is_empty() {
            self.pending.remove(&(u, j));
        }
        let i = self.idx(u, j);
        self.l[i] -= 1;
        self.k[i] += 1;
        Some(event)
    }

    pub fn has_pending(&self, u: usize, j: usize) -> bool {
        self.pending.contains_key(&(u, j))
    }

    /// Largest per-pair count over the whole ledger.
    pub fn max_count(&self) -> u32 {
        self.k
            .iter()
            .zip(&self.l)
            .map(|(a, b)| a + b)
            .max()
            .unwrap_or(0)
    }

    /// Checks `K + L <= B` everywhere and that pending observations exist
    /// exactly for the pairs with `L > 0`.
    pub fn audit(&self) -> Result<()> {
        for u in 0..self.users {
            for j in 0..self.items {
                let i = self.idx(u, j);
                if self.k[i] + self.l[i] > self.budget {
                    return Err(Error::Budget {
                        user: u,
                        item: j,
                        count: self.k[i] + self.l[i],
                        budget: self.budget,
                    });
                }
                let stored = self.pending.get(&(u, j)).map_or(0, Vec::len);
                if stored != self.l[i] as usize {
                    return Err(Error::Protocol(format!(
                        "pair ({u}, {j}) has L = {} but {stored} stored observations",
                        self.l[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_one_blocks_second_recommendation() {
        let mut ledger = BlockingLedger::new(2, 2, 1);
        ledger.record_pending(0, 1, 0).unwrap();
        assert!(matches!(
            ledger.record_pending(0, 1, 1),
            Err(Error::Budget { .. })
        ));
        assert!(ledger.record_consumed(1, 1).is_ok());
    }

    #[test]
    fn budget_three_counts() {
        let mut ledger = BlockingLedger::new(1, 1, 3);
        for e in 0..3 {
            let before = ledger.count(0, 0);
            ledger.record_pending(0, 0, e).unwrap();
            assert_eq!(ledger.count(0, 0), before + 1);
        }
        assert!(ledger.record_consumed(0, 0).is_err());
        assert!(ledger.is_blocked(0, 0));
    }

    #[test]
    fn reuse_moves_count_from_l_to_k() {
        let mut ledger = BlockingLedger::new(1, 2, 2);
        ledger.record_pending(0, 0, 4).unwrap();
        ledger.record_pending(0, 0, 9).unwrap();
        assert_eq!((ledger.k(0, 0), ledger.l(0, 0)), (0, 2));
        assert_eq!(ledger.take_pending(0, 0), Some(9));
        assert_eq!((ledger.k(0, 0), ledger.l(0, 0)), (1, 1));
        assert_eq!(ledger.take_pending(0, 0), Some(4));
        assert_eq!(ledger.take_pending(0, 0), None);
        assert!(!ledger.has_pending(0, 0));
        assert_eq!(ledger.count(0, 0), 2);
        ledger.audit().unwrap();
    }
}

//! Interaction histories `y1 x1 y2 x2 ...`.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_traits::Zero;

use crate::alphabet::{Action, Alphabet, Percept};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// An alternating action/percept record. The last action may still await its percept.
#[derive(Debug, Clone)]
pub struct History {
    alphabet: Arc<Alphabet>,
    cycles: Vec<(Action, Percept)>,
    pending: Option<Action>,
}

impl History {
    pub fn new(alphabet: Arc<Alphabet>) -> Self {
        Self {
            alphabet,
            cycles: Vec::new(),
            pending: None,
        }
    }

    pub fn from_cycles(
        alphabet: Arc<Alphabet>,
        cycles: impl IntoIterator<Item = (Action, Percept)>,
    ) -> Result<Self> {
        let mut h = Self::new(alphabet);
        for (y, x) in cycles {
            h.push_cycle(y, x)?;
        }
        Ok(h)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn push_action(&mut self, y: Action) -> Result<()> {
        if let Some(prev) = self.pending {
            return Err(Error::Alternation(format!(
                "action {y} follows action {prev} without a percept"
            )));
        }
        self.alphabet.check_action(y)?;
        self.pending = Some(y);
        Ok(())
    }

    pub fn push_percept(&mut self, x: Percept) -> Result<()> {
        let y = self
            .pending
            .ok_or_else(|| Error::Alternation(format!("percept {x} without a preceding action")))?;
        self.alphabet.check_percept(x)?;
        self.pending = None;
        self.cycles.push((y, x));
        Ok(())
    }

    pub fn push_cycle(&mut self, y: Action, x: Percept) -> Result<()> {
        self.push_action(y)?;
        self.push_percept(x)
    }

    /// Unchecked append used on hot paths where `y` and `x` come from the alphabet.
    pub(crate) fn push_unchecked(&mut self, y: Action, x: Percept) {
        debug_assert!(self.pending.is_none());
        self.cycles.push((y, x));
    }

    pub(crate) fn pop_unchecked(&mut self) {
        self.cycles.pop();
    }

    /// Number of completed cycles; the current cycle is `completed() + 1`.
    pub fn completed(&self) -> usize {
        self.cycles.len()
    }

    pub fn current_cycle(&self) -> usize {
        self.cycles.len() + 1
    }

    pub fn pending(&self) -> Option<Action> {
        self.pending
    }

    pub fn cycles(&self) -> &[(Action, Percept)] {
        &self.cycles
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.cycles.iter().map(|c| c.0)
    }

    pub fn percepts(&self) -> impl Iterator<Item = Percept> + '_ {
        self.cycles.iter().map(|c| c.1)
    }

    pub fn is_prefix_of(&self, other: &History) -> bool {
        self.pending.is_none() && other.cycles.starts_with(&self.cycles)
    }

    /// Exact reward sum `r_from + ... + r_to` over completed cycles (1-based, inclusive).
    pub fn total_reward(&self, from: usize, to: usize) -> Result<Rational> {
        if from == 0 || from > to || to > self.cycles.len() {
            return Err(Error::Range {
                from,
                to,
                available: self.cycles.len(),
            });
        }
        Ok(self.cycles[from - 1..to]
            .iter()
            .fold(Rational::zero(), |acc, (_, x)| acc + self.alphabet.reward(*x)))
    }
}

impl PartialEq for History {
    fn eq(&self, other: &Self) -> bool {
        self.cycles == other.cycles && self.pending == other.pending
    }
}

impl Eq for History {}

impl Hash for History {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.cycles.hash(state);
        self.pending.hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    fn with_rewards(rewards: &[u16]) -> History {
        let a = Arc::new(Alphabet::agent_default());
        History::from_cycles(a, rewards.iter().map(|&r| (Action(0), Percept::new(0, r)))).unwrap()
    }

    #[test]
    fn total_reward_examples() {
        let h = with_rewards(&[1, 0, 1]);
        assert_eq!(h.total_reward(1, 3).unwrap(), int(2));
        assert_eq!(h.total_reward(2, 2).unwrap(), int(0));
        assert_eq!(h.total_reward(3, 3).unwrap(), int(1));

        let half = Arc::new(Alphabet::new(1, 1, vec![rat(1, 2), rat(1, 4)]).unwrap());
        let h = History::from_cycles(
            half,
            [(Action(0), Percept::new(0, 0)), (Action(0), Percept::new(0, 1))],
        )
        .unwrap();
        assert_eq!(h.total_reward(1, 2).unwrap(), rat(3, 4));
    }

    #[test]
    fn total_reward_range_errors() {
        let h = with_rewards(&[1, 0]);
        assert!(matches!(h.total_reward(0, 1), Err(Error::Range { .. })));
        assert!(matches!(h.total_reward(2, 1), Err(Error::Range { .. })));
        assert!(matches!(h.total_reward(1, 3), Err(Error::Range { .. })));
    }

    #[test]
    fn alternation_is_enforced() {
        let mut h = History::new(Arc::new(Alphabet::agent_default()));
        h.push_action(Action(1)).unwrap();
        assert!(matches!(h.push_action(Action(0)), Err(Error::Alternation(_))));
        h.push_percept(Percept::new(1, 1)).unwrap();
        assert!(matches!(h.push_percept(Percept::new(1, 1)), Err(Error::Alternation(_))));
        assert_eq!(h.completed(), 1);
        assert!(h.push_action(Action(2)).is_err());
    }

    proptest! {
        #[test]
        fn total_reward_is_additive(rewards in prop::collection::vec(0u16..2, 1..12), a in 0usize..12, b in 0usize..12, c in 0usize..12) {
            let h = with_rewards(&rewards);
            let n = rewards.len();
            let mut idx = [a % n + 1, b % n + 1, c % n + 1];
            idx.sort();
            let [a, b, c] = idx;
            prop_assume!(b < c);
            let whole = h.total_reward(a, c).unwrap();
            let split = h.total_reward(a, b).unwrap() + h.total_reward(b + 1, c).unwrap();
            prop_assert_eq!(whole, split);
        }
    }
}

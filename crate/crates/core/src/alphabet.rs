//! Finite action and percept alphabets.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// An action symbol `y`, an index into the action alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Action(pub u16);

/// A percept `x = x' r`: a regular symbol and a reward, the latter stored as an
/// index into [`Alphabet::rewards`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Percept {
    pub regular: u16,
    pub reward: u16,
}

impl Percept {
    pub const fn new(regular: u16, reward: u16) -> Self {
        Self { regular, reward }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Percept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.regular, self.reward)
    }
}

/// Sizes of `Y` and `X'` plus the reward values, each a rational in `[0,1]`.
///
/// Percepts are flattened to a dense index `regular * |R| + reward`, which is
/// the order used by program tables and probability tables everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    actions: u16,
    regular: u16,
    rewards: Vec<Rational>,
}

impl Alphabet {
    pub fn new(actions: u16, regular: u16, rewards: Vec<Rational>) -> Result<Self> {
        if actions == 0 || regular == 0 || rewards.is_empty() {
            return Err(Error::Argument(
                "alphabets need at least one action, one regular symbol and one reward".into(),
            ));
        }
        if let Some(bad) = rewards.iter().find(|r| !rational::in_unit_interval(r)) {
            return Err(Error::Argument(format!("reward {bad} outside [0,1]")));
        }
        let percepts = regular as usize * rewards.len();
        if percepts > u16::MAX as usize {
            return Err(Error::Argument("percept alphabet too large".into()));
        }
        Ok(Self {
            actions,
            regular,
            rewards,
        })
    }

    /// `|Y| = |X'| = 2`, rewards `{0, 1}`.
    pub fn agent_default() -> Self {
        Self::new(2, 2, vec![rational::int(0), rational::int(1)]).expect("valid")
    }

    /// One action per arm, an empty regular part and rewards `{0, 1}`.
    pub fn bandit(arms: u16) -> Self {
        Self::new(arms, 1, vec![rational::int(0), rational::int(1)]).expect("valid")
    }

    /// Binary sequence prediction: a single spectator action and no reward.
    pub fn prediction() -> Self {
        Self::new(1, 2, vec![rational::int(0)]).expect("valid")
    }

    pub fn actions(&self) -> u16 {
        self.actions
    }

    pub fn regular(&self) -> u16 {
        self.regular
    }

    pub fn rewards(&self) -> &[Rational] {
        &self.rewards
    }

    pub fn percepts(&self) -> u16 {
        self.regular * self.rewards.len() as u16
    }

    pub fn percept_index(&self, x: Percept) -> u16 {
        x.regular * self.rewards.len() as u16 + x.reward
    }

    pub fn percept(&self, index: u16) -> Percept {
        let nr = self.rewards.len() as u16;
        Percept::new(index / nr, index % nr)
    }

    pub fn reward(&self, x: Percept) -> &Rational {
        &self.rewards[x.reward as usize]
    }

    /// Index of the given reward value, if it is part of the alphabet.
    pub fn reward_index(&self, value: &Rational) -> Option<u16> {
        self.rewards.iter().position(|r| r == value).map(|i| i as u16)
    }

    pub fn max_reward(&self) -> Rational {
        self.rewards
            .iter()
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn check_action(&self, y: Action) -> Result<()> {
        if y.0 < self.actions {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "action {} outside alphabet of size {}",
                y.0, self.actions
            )))
        }
    }

    pub fn check_percept(&self, x: Percept) -> Result<()> {
        if x.regular < self.regular && (x.reward as usize) < self.rewards.len() {
            Ok(())
        } else {
            Err(Error::Argument(format!("percept {x} outside alphabet")))
        }
    }

    pub fn all_actions(&self) -> impl Iterator<Item = Action> {
        (0..self.actions).map(Action)
    }

    pub fn all_percepts(&self) -> impl Iterator<Item = Percept> + '_ {
        (0..self.percepts()).map(move |i| self.percept(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percept_index_round_trips() {
        let a = Alphabet::agent_default();
        assert_eq!(a.percepts(), 4);
        for i in 0..a.percepts() {
            assert_eq!(a.percept_index(a.percept(i)), i);
        }
        assert_eq!(a.percept_index(Percept::new(1, 0)), 2);
    }

    #[test]
    fn rejects_rewards_outside_unit_interval() {
        assert!(Alphabet::new(2, 2, vec![rational::int(2)]).is_err());
        assert!(Alphabet::new(0, 2, vec![rational::int(0)]).is_err());
    }
}

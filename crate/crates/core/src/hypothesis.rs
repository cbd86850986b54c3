use crate::alphabet::{Action, Alphabet};

/// A finite-state chronological measure: in every state and for every action it
/// yields an exact distribution over percepts, with all probabilities sharing
/// the fixed [`denominator`](Hypothesis::denominator).
///
/// Deterministic programs, stochastic class members and the bundled true
/// environments all implement this, so the mixture, the planner and the
/// predictor share one exact propagation kernel.
pub trait Hypothesis: Send + Sync {
    fn alphabet(&self) -> &Alphabet;

    fn initial_state(&self) -> u32;

    fn denominator(&self) -> u64;

    /// Appends `(percept index, numerator)` for every percept of positive probability.
    fn percept_table(&self, state: u32, action: Action, out: &mut Vec<(u16, u64)>);

    fn next_state(&self, state: u32, action: Action, percept: u16) -> u32;
}

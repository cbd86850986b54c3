//! The computable mixture `xi(y x_{1:n}) = sum over consistent members of 2^-l(q) rho_q`.
//!
//! `xi` is kept unnormalised: it is a semimeasure with `xi(empty) <= 1` equal to
//! the Kraft sum of the class. Conditionals are ratios, so the normalisation
//! never matters for prediction or planning.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::alphabet::{Action, Percept};
use crate::belief::{self, Kernel, Particle};
use crate::class::{Member, ProgramClass};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::history::History;
use crate::hypothesis::Hypothesis;
use crate::prefix;
use crate::rational::{self, Rational};

/// Immutable snapshot of the class conditioned on a history.
#[derive(Debug, Clone)]
pub struct MixtureState {
    class: Arc<ProgramClass>,
    /// Per member `2^-l(q) rho_q(history)` as numerators over `denom`.
    weights: Vec<BigUint>,
    states: Vec<u32>,
    denom: BigUint,
    history: History,
}

impl MixtureState {
    pub fn new(class: Arc<ProgramClass>) -> Self {
        let weights = (0..class.len()).map(|i| class.prior_numerator(i)).collect();
        let states = class.members().iter().map(|m| m.initial_state()).collect();
        let denom = BigUint::one() << class.max_code_len();
        let history = History::new(class.alphabet().clone());
        Self {
            class,
            weights,
            states,
            denom,
            history,
        }
    }

    pub fn class(&self) -> &Arc<ProgramClass> {
        &self.class
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn alive(&self, i: usize) -> bool {
        !self.weights[i].is_zero()
    }

    pub fn alive_count(&self) -> usize {
        self.weights.iter().filter(|w| !w.is_zero()).count()
    }

    /// `xi(history)`.
    pub fn mass(&self) -> Rational {
        rational::from_biguints(&self.weights.iter().sum(), &self.denom)
    }

    /// The snapshot after one more cycle `(y, x)`.
    pub fn condition(&self, y: Action, x: Percept) -> Result<Self> {
        let mut next = self.clone();
        next.condition_in_place(y, x)?;
        Ok(next)
    }

    pub fn condition_in_place(&mut self, y: Action, x: Percept) -> Result<()> {
        let alphabet = self.class.alphabet().clone();
        self.history.push_cycle(y, x)?;
        let xi = alphabet.percept_index(x);
        let den = self.class.denominator();
        let mut table = Vec::with_capacity(4);
        for (i, m) in self.class.members().iter().enumerate() {
            if self.weights[i].is_zero() {
                continue;
            }
            table.clear();
            m.percept_table(self.states[i], y, &mut table);
            match table.iter().find(|e| e.0 == xi) {
                Some(&(_, num)) => {
                    let factor = num * (den / m.denominator());
                    if factor != 1 {
                        self.weights[i] *= factor;
                    }
                    self.states[i] = m.next_state(self.states[i], y, xi);
                }
                None => self.weights[i] = BigUint::zero(),
            }
        }
        self.denom *= den;
        if self.weights.iter().all(Zero::is_zero) {
            return Err(Error::ZeroMass);
        }
        Ok(())
    }

    /// This snapshot further conditioned so that its history equals `h`.
    pub fn conditioned_on(&self, h: &History) -> Result<Self> {
        if !self.history.is_prefix_of(h) {
            return Err(Error::Argument(
                "mixture history is not a prefix of the requested history".into(),
            ));
        }
        let mut m = self.clone();
        for &(y, x) in &h.cycles()[self.history.completed()..] {
            m.condition_in_place(y, x)?;
        }
        Ok(m)
    }

    /// `xi(y x_{1:n})` summed afresh over the whole class.
    pub fn xi_joint(&self, actions: &[Action], percepts: &[Percept]) -> Result<Rational> {
        self.xi_joint_with(Execution::default(), actions, percepts)
    }

    pub fn xi_joint_with(
        &self,
        exec: Execution,
        actions: &[Action],
        percepts: &[Percept],
    ) -> Result<Rational> {
        if actions.len() != percepts.len() {
            return Err(Error::Argument(format!(
                "{} actions but {} percepts",
                actions.len(),
                percepts.len()
            )));
        }
        let terms = exec::map(exec, self.class.members(), |m| {
            let p = m.likelihood(actions, percepts);
            if p.is_zero() {
                p
            } else {
                p / Rational::from_integer(BigInt::one() << m.code_len())
            }
        });
        Ok(terms.into_iter().sum())
    }

    /// `xi(yx_{<k} y_k x_k) / xi(yx_{<k})` for the snapshot's history.
    pub fn xi_conditional(&self, y: Action, x: Percept) -> Result<Rational> {
        let parent: BigUint = self.weights.iter().sum();
        if parent.is_zero() {
            return Err(Error::ZeroMass);
        }
        self.class.alphabet().check_action(y)?;
        self.class.alphabet().check_percept(x)?;
        let xi = self.class.alphabet().percept_index(x);
        let den = self.class.denominator();
        let mut child = BigUint::zero();
        let mut table = Vec::with_capacity(4);
        for (i, m) in self.class.members().iter().enumerate() {
            if self.weights[i].is_zero() {
                continue;
            }
            table.clear();
            m.percept_table(self.states[i], y, &mut table);
            if let Some(&(_, num)) = table.iter().find(|e| e.0 == xi) {
                child += &self.weights[i] * (num * (den / m.denominator()));
            }
        }
        Ok(rational::from_biguints(&child, &(parent * den)))
    }

    /// Normalised posterior `w(q) = 2^-l(q) rho_q(h) / xi(h)`, indexed by member.
    pub fn posterior_weights(&self) -> Result<Vec<Rational>> {
        let total: BigUint = self.weights.iter().sum();
        if total.is_zero() {
            return Err(Error::ZeroMass);
        }
        Ok(self
            .weights
            .iter()
            .map(|w| rational::from_biguints(w, &total))
            .collect())
    }

    /// `xi(yx) - 2^-l(q) rho_q(yx)`; never negative.
    pub fn dominance_gap(&self, member: usize, actions: &[Action], percepts: &[Percept]) -> Result<Rational> {
        if member >= self.class.len() {
            return Err(Error::Argument(format!("no member {member}")));
        }
        let xi = self.xi_joint(actions, percepts)?;
        let own = self.class.member(member).likelihood(actions, percepts) * self.class.prior(member);
        Ok(xi - own)
    }

    pub fn kernel(&self) -> Kernel<'_> {
        let hyps: Vec<&dyn Hypothesis> = self
            .class
            .members()
            .iter()
            .map(|m| m as &dyn Hypothesis)
            .collect();
        Kernel::new(self.class.alphabet(), hyps)
    }

    /// Alive members as gcd-reduced particles.
    pub fn belief(&self) -> Vec<Particle> {
        let mut ps: Vec<Particle> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(i, w)| Particle {
                member: i as u32,
                state: self.states[i],
                weight: w.clone(),
            })
            .collect();
        belief::normalize(&mut ps);
        ps
    }

    /// Exact `sum_{k<=n} sum_{x_{1:k}} mu(x_{<k}) (xi(x_k|.) - mu(x_k|.))^2`
    /// from the empty history, with the action in cycle `k` taken from
    /// `actions[(k-1) % len]`.
    pub fn squared_distance_sum(
        &self,
        mu: &dyn Hypothesis,
        actions: &[Action],
        n: usize,
        budget: usize,
    ) -> Result<Rational> {
        if self.history.completed() != 0 {
            return Err(Error::Argument("distance sums start from the empty history".into()));
        }
        if n == 0 {
            return Ok(Rational::zero());
        }
        if actions.is_empty() {
            return Err(Error::Argument("empty action script".into()));
        }
        let kernel = self.kernel();
        let percepts = kernel.percepts();
        let mut sum = Rational::zero();
        prefix::walk(
            mu,
            &kernel,
            self.belief(),
            &|k| actions[(k - 1) % actions.len()],
            n,
            budget,
            &mut |v| {
                sum += squared_term(v, percepts)?;
                Ok(())
            },
        )?;
        Ok(sum)
    }
}

/// `mu(x_{<k}) * sum_x (rho(x|.) - mu(x|.))^2` for one node.
pub(crate) fn squared_term(v: &prefix::NodeView<'_>, percepts: usize) -> Result<Rational> {
    if v.rho_mass.is_zero() {
        return Err(Error::ZeroMass);
    }
    let scale_rho = BigInt::from(v.rho_mass * v.rho_den);
    let dmu = BigInt::from(v.mu_den);
    let mut acc = BigInt::zero();
    for x in 0..percepts {
        let a = v
            .mu_table
            .iter()
            .find(|e| e.0 as usize == x)
            .map_or(0, |e| e.1);
        let diff = BigInt::from(v.rho_children[x].clone()) * &dmu - &scale_rho * a;
        acc += &diff * &diff;
    }
    let den = num_traits::pow(dmu.clone(), v.cycle - 1) * num_traits::pow(scale_rho * dmu, 2);
    Ok(Rational::new(BigInt::from(v.mu_mass.clone()) * acc, den))
}

/// One row per member for posterior dumps.
pub fn posterior_rows(m: &MixtureState) -> Result<Vec<(String, Rational)>> {
    Ok(m.class
        .members()
        .iter()
        .map(Member::code)
        .map(|c| c.to_string())
        .zip(m.posterior_weights()?)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::class::{ClassSpec, Family};
    use crate::envs::MemberEnv;
    use crate::machine::ChronProgram;
    use crate::rational::{int, rat};

    fn agent() -> Arc<Alphabet> {
        Arc::new(Alphabet::agent_default())
    }

    fn zero_one_class() -> (Arc<ProgramClass>, ChronProgram, ChronProgram) {
        let a = agent();
        let zero = ChronProgram::constant(a.clone(), Percept::new(0, 0)).unwrap();
        let one = ChronProgram::constant(a.clone(), Percept::new(1, 0)).unwrap();
        let class = ProgramClass::from_members(
            a,
            vec![Member::Program(zero.clone()), Member::Program(one.clone())],
        )
        .unwrap();
        (Arc::new(class), zero, one)
    }

    #[test]
    fn joint_of_empty_sequence_is_kraft_sum() {
        let class = Arc::new(
            ProgramClass::build(agent(), &ClassSpec::new(12, Family::Bernoulli)).unwrap(),
        );
        let m = MixtureState::new(class.clone());
        assert_eq!(m.xi_joint(&[], &[]).unwrap(), class.kraft_sum());
        assert_eq!(m.mass(), class.kraft_sum());
        assert!(m.xi_joint(&[Action(0)], &[]).is_err());
    }

    #[test]
    fn two_member_joint_and_conditional() {
        let (class, zero, one) = zero_one_class();
        // Both constant programs are 6 bits long.
        let (a, b) = (zero.code_len() as i64, one.code_len() as i64);
        assert_eq!((a, b), (6, 6));
        let m = MixtureState::new(class);
        let ys = [Action(1), Action(0)];
        let xs = [Percept::new(0, 0); 2];
        assert_eq!(m.xi_joint(&ys, &xs).unwrap(), rat(1, 1 << a));
        let mixed = [Percept::new(0, 0), Percept::new(1, 0)];
        assert_eq!(m.xi_joint(&ys, &mixed).unwrap(), int(0));

        let wa = rat(1, 1 << a);
        let wb = rat(1, 1 << b);
        let p0 = m.xi_conditional(Action(0), Percept::new(0, 0)).unwrap();
        assert_eq!(p0, wa.clone() / (wa + wb));
        assert_eq!(p0, rat(1, 2));
    }

    #[test]
    fn unanimous_members_give_certainty() {
        let (class, _, _) = zero_one_class();
        let m = MixtureState::new(class)
            .condition(Action(0), Percept::new(1, 0))
            .unwrap();
        assert_eq!(m.xi_conditional(Action(1), Percept::new(1, 0)).unwrap(), int(1));
        assert_eq!(m.xi_conditional(Action(1), Percept::new(0, 0)).unwrap(), int(0));
    }

    #[test]
    fn posterior_examples() {
        let (class, _, _) = zero_one_class();
        let m = MixtureState::new(class.clone());
        assert_eq!(m.posterior_weights().unwrap(), vec![rat(1, 2), rat(1, 2)]);
        let m = m.condition(Action(0), Percept::new(0, 0)).unwrap();
        assert_eq!(m.posterior_weights().unwrap(), vec![int(1), int(0)]);
        assert!(!m.alive(1));
        assert!(matches!(
            m.condition(Action(0), Percept::new(1, 1)),
            Err(Error::ZeroMass)
        ));
    }

    #[test]
    fn dominance_examples() {
        let (class, _, _) = zero_one_class();
        let m = MixtureState::new(class.clone());
        let ys = [Action(0)];
        // Member 1 emits 1, inconsistent with x' = 0: gap is all of xi.
        let xs = [Percept::new(0, 0)];
        assert_eq!(m.dominance_gap(1, &ys, &xs).unwrap(), m.xi_joint(&ys, &xs).unwrap());
        assert_eq!(m.dominance_gap(0, &ys, &xs).unwrap(), int(0));

        let single = Arc::new(ProgramClass::from_members(agent(), vec![class.member(0).clone()]).unwrap());
        let s = MixtureState::new(single);
        assert_eq!(s.dominance_gap(0, &ys, &xs).unwrap(), int(0));
    }

    #[test]
    fn dominance_gap_is_rival_mass_for_shared_prefix() {
        let a = agent();
        let zero = ChronProgram::constant(a.clone(), Percept::new(0, 0)).unwrap();
        let alt = ChronProgram::alternator(a.clone(), Percept::new(0, 0), Percept::new(1, 0)).unwrap();
        let class = Arc::new(
            ProgramClass::from_members(a, vec![Member::Program(zero), Member::Program(alt.clone())]).unwrap(),
        );
        let m = MixtureState::new(class);
        let gap = m.dominance_gap(0, &[Action(0)], &[Percept::new(0, 0)]).unwrap();
        assert_eq!(gap, rat(1, 1 << alt.code_len()));
    }

    #[test]
    fn singleton_distance_is_zero() {
        let a = agent();
        let q = ChronProgram::echo(a.clone()).unwrap();
        let class = Arc::new(ProgramClass::from_members(a, vec![Member::Program(q.clone())]).unwrap());
        let m = MixtureState::new(class);
        let env = MemberEnv(q);
        assert_eq!(m.squared_distance_sum(&env, &[Action(0), Action(1)], 8, 1 << 20).unwrap(), int(0));
        assert_eq!(m.squared_distance_sum(&env, &[Action(0)], 0, 1).unwrap(), int(0));
    }

    #[test]
    fn martingale_identity_holds() {
        let class = Arc::new(
            ProgramClass::build(agent(), &ClassSpec::new(12, Family::Bernoulli)).unwrap(),
        );
        let path = [
            (Action(1), Percept::new(1, 1)),
            (Action(0), Percept::new(1, 0)),
            (Action(0), Percept::new(0, 1)),
        ];
        let mut m = MixtureState::new(class);
        let mut ys = Vec::new();
        let mut xs = Vec::new();
        for (y, x) in path {
            let before = m.xi_joint(&ys, &xs).unwrap();
            let cond = m.xi_conditional(y, x).unwrap();
            ys.push(y);
            xs.push(x);
            assert_eq!(m.xi_joint(&ys, &xs).unwrap(), before * cond);
            m.condition_in_place(y, x).unwrap();
            assert_eq!(m.mass(), m.xi_joint(&ys, &xs).unwrap());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let class = Arc::new(
            ProgramClass::build(agent(), &ClassSpec::new(12, Family::Bernoulli)).unwrap(),
        );
        let m = MixtureState::new(class.clone());
        let mu = class.member(class.len() - 1).clone();
        assert!(matches!(
            m.squared_distance_sum(&mu, &[Action(0)], 12, 5),
            Err(Error::Budget(_))
        ));
    }
}

//! Exact expectimax over chronological models.
//!
//! Values are computed over integers. A decision node at depth `d` below the
//! root carries a belief of mass `M` (in the belief's own scale) and its value
//! is represented as `J = V * M * D^(H-d) * RG`, where `D` is the kernel
//! denominator, `H` the number of planned cycles and `RG` clears the
//! denominators of every discounted reward. Then
//!
//! ```text
//! J(node) = max_y sum_x [ M_x * D^(H-d-1) * g_(k+d) r_x RG + J(child_x) ]
//! ```
//!
//! with `M_x` the child masses, so the whole recursion needs no gcd and the
//! root value is `J / (M * D^H * RG)`. Percepts of zero model mass are skipped,
//! which gives any semimeasure deficit reward zero.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::alphabet::{Action, Alphabet, Percept};
use crate::belief::{self, Kernel, Particle};
use crate::envs::{self, Environment};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::history::History;
use crate::horizon::HorizonPolicy;
use crate::mixture::MixtureState;
use crate::rational::Rational;

/// The model `rho` the planner maximises under: the true environment (AImu)
/// or the mixture (AIxi).
#[derive(Clone, Copy)]
pub enum ModelRho<'a> {
    True(&'a dyn Environment),
    Mixture(&'a MixtureState),
}

impl<'a> ModelRho<'a> {
    pub fn alphabet(&self) -> &'a Alphabet {
        match *self {
            ModelRho::True(e) => e.alphabet(),
            ModelRho::Mixture(m) => m.class().alphabet(),
        }
    }

    /// `rho(x_k | yx_{<k} y_k)`.
    pub fn conditional(&self, h: &History, y: Action, x: Percept) -> Result<Rational> {
        self.alphabet().check_percept(x)?;
        match *self {
            ModelRho::True(e) => {
                let dist = envs::mu_conditional(e, h, y)?;
                Ok(dist[e.alphabet().percept_index(x) as usize].clone())
            }
            ModelRho::Mixture(m) => m.conditioned_on(h)?.xi_conditional(y, x),
        }
    }

    fn tag(&self) -> String {
        match *self {
            ModelRho::True(e) => format!("mu:{}", e.name()),
            ModelRho::Mixture(m) => {
                let c = m.class();
                format!("xi:{}:{}:{:?}", c.len(), c.max_code_len(), c.family())
            }
        }
    }

    fn kernel(&self) -> Kernel<'a> {
        match *self {
            ModelRho::True(e) => Kernel::single(e),
            ModelRho::Mixture(m) => m.kernel(),
        }
    }

    fn root(&self, h: &History) -> Result<Vec<Particle>> {
        match *self {
            ModelRho::True(e) => Ok(vec![Particle {
                member: 0,
                state: envs::state_after(e, h),
                weight: BigUint::one(),
            }]),
            ModelRho::Mixture(m) => {
                let c = m.conditioned_on(h)?;
                if c.alive_count() == 0 {
                    return Err(Error::ZeroMass);
                }
                Ok(c.belief())
            }
        }
    }
}

/// A (possibly history-dependent) action rule.
pub trait Policy: Send + Sync {
    fn act(&self, h: &History) -> Result<Action>;

    /// Identity used to share memoised values across calls; `None` disables caching.
    fn memo_tag(&self) -> Option<String> {
        None
    }
}

/// Replays a fixed action script; past its end it repeats the last action.
#[derive(Debug, Clone)]
pub struct Scripted(pub Vec<Action>);

impl Policy for Scripted {
    fn act(&self, h: &History) -> Result<Action> {
        self.0
            .get(h.completed())
            .or(self.0.last())
            .copied()
            .ok_or_else(|| Error::Argument("empty script".into()))
    }
}

/// Always the same action.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub Action);

impl Policy for Constant {
    fn act(&self, _: &History) -> Result<Action> {
        Ok(self.0)
    }

    fn memo_tag(&self) -> Option<String> {
        Some(format!("const:{}", self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueResult {
    pub value: Rational,
    pub best_action: Action,
    pub node_count: usize,
    /// Value of each root action; empty when nothing is left to plan.
    pub action_values: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    tag: String,
    cycles: Vec<(Action, Percept)>,
}

/// History-keyed value cache. Entries are normalised values, so they are
/// valid whatever scale a later search reaches the same history with.
#[derive(Debug, Default)]
pub struct Memo {
    table: Mutex<HashMap<MemoKey, (Rational, Action)>>,
}

impl Memo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.table.lock().unwrap().clear();
    }

    fn get(&self, key: &MemoKey) -> Option<(Rational, Action)> {
        self.table.lock().unwrap().get(key).cloned()
    }

    fn insert(&self, key: MemoKey, value: (Rational, Action)) {
        // Idempotent: any writer of a key computes the same value.
        self.table.lock().unwrap().entry(key).or_insert(value);
    }
}

#[derive(Debug, Clone)]
pub struct Planner {
    pub node_budget: usize,
    pub exec: Execution,
    pub memo: Option<std::sync::Arc<Memo>>,
}

impl Default for Planner {
    fn default() -> Self {
        Self {
            node_budget: 1 << 24,
            exec: Execution::default(),
            memo: None,
        }
    }
}

impl Planner {
    pub fn new(node_budget: usize) -> Self {
        Self {
            node_budget,
            ..Self::default()
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_memo(mut self) -> Self {
        self.memo = Some(std::sync::Arc::new(Memo::new()));
        self
    }

    /// `V*_rho(h)` with the maximising first action.
    pub fn optimal_value(&self, rho: ModelRho<'_>, h: &History, hp: &HorizonPolicy) -> Result<ValueResult> {
        let Some(frame) = Frame::new(self, rho, h, hp)? else {
            return Ok(empty_result());
        };
        let root = rho.root(h)?;
        let m = belief::mass(&root);
        let search = Search {
            frame: &frame,
            kernel: &rho.kernel(),
            tag: frame.memo.as_ref().map(|_| format!("opt:{}:{hp}:{}", rho.tag(), frame.end)),
        };
        search.tick()?;
        let actions: Vec<Action> = rho.alphabet().all_actions().collect();
        let per_action = exec::map(self.exec, &actions, |&y| {
            let mut hist = h.clone();
            search.action_value(&root, y, &mut hist, 0)
        });
        let mut best = 0usize;
        let mut js = Vec::with_capacity(actions.len());
        for (i, j) in per_action.into_iter().enumerate() {
            let j = j?;
            if i > 0 && j > js[best] {
                best = i;
            }
            js.push(j);
        }
        let scale = frame.scale(&m, 0);
        let action_values: Vec<Rational> = js.iter().map(|j| frame.ratio(j, &scale)).collect();
        let value = action_values[best].clone();
        if let (Some(memo), Some(tag)) = (&frame.memo, &search.tag) {
            memo.insert(
                MemoKey {
                    tag: tag.clone(),
                    cycles: h.cycles().to_vec(),
                },
                (value.clone(), actions[best]),
            );
        }
        Ok(ValueResult {
            value,
            best_action: actions[best],
            node_count: frame.nodes.load(Ordering::Relaxed),
            action_values,
        })
    }

    pub fn best_action(&self, rho: ModelRho<'_>, h: &History, hp: &HorizonPolicy) -> Result<Action> {
        Ok(self.optimal_value(rho, h, hp)?.best_action)
    }

    /// `V^p_rho(h)`: expected discounted reward when `p` chooses every action.
    pub fn value_of_policy(
        &self,
        rho: ModelRho<'_>,
        p: &dyn Policy,
        h: &History,
        hp: &HorizonPolicy,
    ) -> Result<Rational> {
        Ok(self.evaluate_policy(rho, p, h, hp)?.0)
    }

    /// Like [`value_of_policy`](Self::value_of_policy), also returning the node count.
    pub fn evaluate_policy(
        &self,
        rho: ModelRho<'_>,
        p: &dyn Policy,
        h: &History,
        hp: &HorizonPolicy,
    ) -> Result<(Rational, usize)> {
        let Some(frame) = Frame::new(self, rho, h, hp)? else {
            return Ok((Rational::zero(), 0));
        };
        let root = rho.root(h)?;
        let m = belief::mass(&root);
        let tag = match (&frame.memo, p.memo_tag()) {
            (Some(_), Some(t)) => Some(format!("pol:{t}:{}:{hp}:{}", rho.tag(), frame.end)),
            _ => None,
        };
        let search = Search {
            frame: &frame,
            kernel: &rho.kernel(),
            tag,
        };
        let mut hist = h.clone();
        let j = search.policy_node(&root, p, &mut hist, 0)?;
        let value = frame.ratio(&j, &frame.scale(&m, 0));
        Ok((value, frame.nodes.load(Ordering::Relaxed)))
    }
}

fn empty_result() -> ValueResult {
    ValueResult {
        value: Rational::zero(),
        best_action: Action(0),
        node_count: 0,
        action_values: Vec::new(),
    }
}

/// Per-call constants shared by every node of one search.
struct Frame {
    horizon: usize,
    end: usize,
    percepts: Vec<Percept>,
    /// `rewards[d][x] = g_(k+d) * r_x * RG`.
    rewards: Vec<Vec<BigUint>>,
    rg: BigUint,
    dpow: Vec<BigUint>,
    nodes: AtomicUsize,
    budget: usize,
    memo: Option<std::sync::Arc<Memo>>,
}

impl Frame {
    fn new(planner: &Planner, rho: ModelRho<'_>, h: &History, hp: &HorizonPolicy) -> Result<Option<Self>> {
        if h.pending().is_some() {
            return Err(Error::Alternation("planning needs a history of completed cycles".into()));
        }
        let k = h.completed() + 1;
        let (end, weights) = match hp.effective_horizon(k) {
            Ok(end) => (end, hp.discount_weights(k)?),
            Err(Error::LifespanExceeded { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let alphabet = rho.alphabet();
        let percepts: Vec<Percept> = alphabet.all_percepts().collect();
        let mut rg = BigInt::one();
        for g in &weights {
            for &x in &percepts {
                rg = rg.lcm((g * alphabet.reward(x)).denom());
            }
        }
        let rg_rat = Rational::from_integer(rg.clone());
        let rewards = weights
            .iter()
            .map(|g| {
                percepts
                    .iter()
                    .map(|&x| {
                        let v = g * alphabet.reward(x) * &rg_rat;
                        debug_assert!(v.is_integer());
                        v.to_integer().to_biguint().expect("rewards are nonnegative")
                    })
                    .collect()
            })
            .collect();
        let horizon = weights.len();
        let den = BigUint::from(rho.kernel().denominator());
        let mut dpow = vec![BigUint::one()];
        for i in 0..horizon {
            let next = &dpow[i] * &den;
            dpow.push(next);
        }
        Ok(Some(Self {
            horizon,
            end,
            percepts,
            rewards,
            rg: rg.to_biguint().expect("positive"),
            dpow,
            nodes: AtomicUsize::new(0),
            budget: planner.node_budget,
            memo: planner.memo.clone(),
        }))
    }

    /// `M * D^(H-d) * RG`, the denominator turning `J` into a value at depth `d`.
    fn scale(&self, mass: &BigUint, d: usize) -> BigUint {
        mass * &self.dpow[self.horizon - d] * &self.rg
    }

    fn ratio(&self, j: &BigUint, scale: &BigUint) -> Rational {
        Rational::new(BigInt::from(j.clone()), BigInt::from(scale.clone()))
    }
}

struct Search<'f, 'k> {
    frame: &'f Frame,
    kernel: &'f Kernel<'k>,
    tag: Option<String>,
}

impl Search<'_, '_> {
    fn tick(&self) -> Result<()> {
        let n = self.frame.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.frame.budget {
            return Err(Error::Budget(format!(
                "expectimax exceeds {} nodes",
                self.frame.budget
            )));
        }
        Ok(())
    }

    fn key(&self, hist: &History) -> Option<MemoKey> {
        self.tag.as_ref().map(|t| MemoKey {
            tag: t.clone(),
            cycles: hist.cycles().to_vec(),
        })
    }

    fn lookup(&self, key: &Option<MemoKey>, mass: &BigUint, d: usize) -> Option<(BigUint, Action)> {
        let (memo, key) = (self.frame.memo.as_ref()?, key.as_ref()?);
        let (v, a) = memo.get(key)?;
        let j = v * Rational::from_integer(BigInt::from(self.frame.scale(mass, d)));
        debug_assert!(j.is_integer());
        Some((j.to_integer().to_biguint()?, a))
    }

    fn store(&self, key: Option<MemoKey>, j: &BigUint, mass: &BigUint, d: usize, a: Action) {
        if let (Some(memo), Some(key)) = (&self.frame.memo, key) {
            memo.insert(key, (self.frame.ratio(j, &self.frame.scale(mass, d)), a));
        }
    }

    /// `sum_x [M_x D^(H-d-1) g r_x RG + J(child_x)]` for action `y`.
    fn action_value(&self, belief: &[Particle], y: Action, hist: &mut History, d: usize) -> Result<BigUint> {
        let mut children = vec![Vec::new(); self.frame.percepts.len()];
        self.kernel.expand(belief, y, &mut children);
        let mut sum = BigUint::zero();
        let last = d + 1 == self.frame.horizon;
        for (x, child) in children.iter().enumerate() {
            if child.is_empty() {
                continue;
            }
            let r = &self.frame.rewards[d][x];
            if !r.is_zero() {
                sum += belief::mass(child) * &self.frame.dpow[self.frame.horizon - d - 1] * r;
            }
            if !last {
                hist.push_unchecked(y, self.frame.percepts[x]);
                let j = self.decision(child, hist, d + 1);
                hist.pop_unchecked();
                sum += j?;
            }
        }
        Ok(sum)
    }

    fn decision(&self, belief: &[Particle], hist: &mut History, d: usize) -> Result<BigUint> {
        self.tick()?;
        let mass = belief::mass(belief);
        let key = self.key(hist);
        if let Some((j, _)) = self.lookup(&key, &mass, d) {
            return Ok(j);
        }
        let mut best: Option<(BigUint, Action)> = None;
        for y in self.kernel.alphabet().all_actions() {
            let j = self.action_value(belief, y, hist, d)?;
            if best.as_ref().is_none_or(|(b, _)| j > *b) {
                best = Some((j, y));
            }
        }
        let (j, a) = best.expect("alphabets have at least one action");
        self.store(key, &j, &mass, d, a);
        Ok(j)
    }

    fn policy_node(&self, belief: &[Particle], p: &dyn Policy, hist: &mut History, d: usize) -> Result<BigUint> {
        if d == self.frame.horizon {
            return Ok(BigUint::zero());
        }
        self.tick()?;
        let mass = belief::mass(belief);
        let key = self.key(hist);
        if let Some((j, _)) = self.lookup(&key, &mass, d) {
            return Ok(j);
        }
        let y = p.act(hist)?;
        self.kernel.alphabet().check_action(y)?;
        let mut children = vec![Vec::new(); self.frame.percepts.len()];
        self.kernel.expand(belief, y, &mut children);
        let mut sum = BigUint::zero();
        for (x, child) in children.iter().enumerate() {
            if child.is_empty() {
                continue;
            }
            let r = &self.frame.rewards[d][x];
            if !r.is_zero() {
                sum += belief::mass(child) * &self.frame.dpow[self.frame.horizon - d - 1] * r;
            }
            hist.push_unchecked(y, self.frame.percepts[x]);
            let j = self.policy_node(child, p, hist, d + 1);
            hist.pop_unchecked();
            sum += j?;
        }
        self.store(key, &sum, &mass, d, y);
        Ok(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{Member, ProgramClass};
    use crate::envs::{IidEnv, MemberEnv};
    use crate::hypothesis::Hypothesis;
    use crate::machine::{ChronProgram, Transition};
    use crate::rational::{int, rat};
    use std::sync::Arc;

    fn bandit() -> IidEnv {
        IidEnv::bandit(vec![rat(1, 5), rat(4, 5)]).unwrap()
    }

    /// Reward 1 exactly when the action is 1.
    fn echo_reward() -> MemberEnv {
        let a = Arc::new(Alphabet::agent_default());
        let table = vec![
            Transition { emit: Percept::new(0, 0), next: 0 },
            Transition { emit: Percept::new(0, 1), next: 0 },
        ];
        MemberEnv(ChronProgram::new(a, 1, table).unwrap())
    }

    fn empty(a: &Alphabet) -> History {
        History::new(Arc::new(a.clone()))
    }

    #[test]
    fn known_bandit_value() {
        let env = bandit();
        let h = empty(env.alphabet());
        let r = Planner::default()
            .optimal_value(ModelRho::True(&env), &h, &HorizonPolicy::fixed(6).unwrap())
            .unwrap();
        assert_eq!(r.value, rat(24, 5));
        assert_eq!(r.best_action, Action(1));
        assert_eq!(r.action_values, vec![rat(4, 1) + rat(1, 5), rat(24, 5)]);
    }

    #[test]
    fn policy_value_examples() {
        let env = bandit();
        let h = empty(env.alphabet());
        let planner = Planner::default();
        let v = planner
            .value_of_policy(ModelRho::True(&env), &Constant(Action(0)), &h, &HorizonPolicy::fixed(4).unwrap())
            .unwrap();
        assert_eq!(v, rat(4, 5));

        let echo = echo_reward();
        let h = empty(echo.alphabet());
        let v = planner
            .value_of_policy(ModelRho::True(&echo), &Constant(Action(1)), &h, &HorizonPolicy::fixed(2).unwrap())
            .unwrap();
        assert_eq!(v, int(2));
    }

    #[test]
    fn empty_future_is_worth_nothing() {
        let env = bandit();
        let a = Arc::new(env.alphabet().clone());
        let h = History::from_cycles(a, [(Action(0), Percept::new(0, 0)); 3]).unwrap();
        let hp = HorizonPolicy::fixed(3).unwrap();
        let r = Planner::default().optimal_value(ModelRho::True(&env), &h, &hp).unwrap();
        assert_eq!((r.value, r.best_action, r.node_count), (int(0), Action(0), 0));
        let v = Planner::default()
            .value_of_policy(ModelRho::True(&env), &Constant(Action(1)), &h, &hp)
            .unwrap();
        assert_eq!(v, int(0));
    }

    #[test]
    fn node_count_is_decision_nodes() {
        let env = bandit();
        let h = empty(env.alphabet());
        let r = Planner::default()
            .optimal_value(ModelRho::True(&env), &h, &HorizonPolicy::fixed(4).unwrap())
            .unwrap();
        assert_eq!(r.node_count, 1 + 4 + 16 + 64);
        let err = Planner::new(50).optimal_value(ModelRho::True(&env), &h, &HorizonPolicy::fixed(4).unwrap());
        assert!(matches!(err, Err(Error::Budget(_))));
    }

    #[test]
    fn single_action_alphabet_has_one_choice() {
        let a = Arc::new(Alphabet::prediction());
        let env = IidEnv::bernoulli_seq(a.clone(), rat(1, 3)).unwrap();
        let r = Planner::default()
            .optimal_value(ModelRho::True(&env), &History::new(a), &HorizonPolicy::moving(3).unwrap())
            .unwrap();
        assert_eq!(r.best_action, Action(0));
    }

    #[test]
    fn mixture_of_constant_rewards_one_step() {
        let a = Arc::new(Alphabet::agent_default());
        let r0 = ChronProgram::constant(a.clone(), Percept::new(0, 0)).unwrap();
        let r1 = ChronProgram::constant(a.clone(), Percept::new(0, 1)).unwrap();
        let class = Arc::new(
            ProgramClass::from_members(a.clone(), vec![Member::Program(r0), Member::Program(r1)]).unwrap(),
        );
        let xi = MixtureState::new(class);
        let r = Planner::default()
            .optimal_value(ModelRho::Mixture(&xi), &History::new(a), &HorizonPolicy::fixed(1).unwrap())
            .unwrap();
        // Equal posteriors; only the reward-1 member pays.
        assert_eq!(r.value, rat(1, 2));
        assert_eq!(r.best_action, Action(0));
        assert_eq!(r.action_values, vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn discounted_values_are_exact() {
        let env = bandit();
        let h = empty(env.alphabet());
        let hp = HorizonPolicy::geometric(rat(1, 2), 3).unwrap();
        let v = Planner::default().optimal_value(ModelRho::True(&env), &h, &hp).unwrap();
        assert_eq!(v.value, rat(4, 5) * (rat(1, 2) + rat(1, 4) + rat(1, 8)));
        let hp = HorizonPolicy::power(1, 2).unwrap();
        let v = Planner::default().optimal_value(ModelRho::True(&env), &h, &hp).unwrap();
        assert_eq!(v.value, rat(4, 5) * rat(3, 2));
    }

    #[test]
    fn memo_is_transparent() {
        let env = bandit();
        let a = Arc::new(env.alphabet().clone());
        let hp = HorizonPolicy::fixed(5).unwrap();
        let plain = Planner::default();
        let cached = Planner::default().with_memo();
        let mut h = History::new(a);
        for (y, x) in [(0, 1), (1, 0), (1, 1)] {
            let p = plain.optimal_value(ModelRho::True(&env), &h, &hp).unwrap();
            let c = cached.optimal_value(ModelRho::True(&env), &h, &hp).unwrap();
            assert_eq!((p.value, p.best_action), (c.value, c.best_action));
            h.push_cycle(Action(y), Percept::new(0, x)).unwrap();
        }
        assert!(!cached.memo.as_ref().unwrap().is_empty());
    }

    #[test]
    fn conditional_of_true_model() {
        let env = bandit();
        let h = empty(env.alphabet());
        let c = ModelRho::True(&env).conditional(&h, Action(1), Percept::new(0, 1)).unwrap();
        assert_eq!(c, rat(4, 5));
    }
}

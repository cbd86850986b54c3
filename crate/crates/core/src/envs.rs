//! True environments `mu`: exact chronological measures with replayable sampling.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::alphabet::{Action, Alphabet, Percept};
use crate::error::{Error, Result};
use crate::history::History;
use crate::hypothesis::Hypothesis;
use crate::machine::{Bits, ChronProgram};
use crate::rational::{self, Rational};

/// A true environment. Environments are measures: every table sums to exactly 1.
pub trait Environment: Hypothesis {
    fn name(&self) -> String;

    fn as_iid(&self) -> Option<&IidEnv> {
        None
    }

    fn as_program(&self) -> Option<&ChronProgram> {
        None
    }
}

/// A memoryless environment: the percept distribution depends only on the
/// current action. Covers [`IidEnv::bernoulli_seq`] and [`IidEnv::bandit`].
#[derive(Clone, PartialEq, Eq)]
pub struct IidEnv {
    name: String,
    alphabet: Arc<Alphabet>,
    params: Vec<Rational>,
    den: u64,
    /// Per action: `(percept index, numerator)` with positive numerators.
    tables: Vec<Vec<(u16, u64)>>,
}

fn reward_index(alphabet: &Alphabet, value: i64) -> Result<u16> {
    alphabet.reward_index(&rational::int(value)).ok_or_else(|| {
        Error::Argument(format!("alphabet lacks reward value {value}"))
    })
}

fn check_theta(theta: &Rational) -> Result<u64> {
    if !rational::in_unit_interval(theta) {
        return Err(Error::Argument(format!("parameter {theta} outside [0,1]")));
    }
    theta
        .denom()
        .to_u64()
        .ok_or_else(|| Error::Argument(format!("denominator of {theta} too large")))
}

impl IidEnv {
    /// The regular bit is 1 with probability `theta`. When the alphabet has
    /// rewards `{0, 1}` the reward is 1 iff the action equals the bit, which
    /// turns prediction into an agent task; otherwise the reward index is 0.
    pub fn bernoulli_seq(alphabet: Arc<Alphabet>, theta: Rational) -> Result<Self> {
        let den = check_theta(&theta)?;
        if alphabet.regular() != 2 {
            return Err(Error::Argument("Bernoulli sequences need a binary regular part".into()));
        }
        let ones = theta.numer().to_u64().expect("numerator <= denominator");
        let paid = alphabet.rewards().len() > 1;
        let (hit, miss) = if paid {
            (reward_index(&alphabet, 1)?, reward_index(&alphabet, 0)?)
        } else {
            (0, 0)
        };
        let tables = alphabet
            .all_actions()
            .map(|y| {
                let mut t = Vec::with_capacity(2);
                for (bit, num) in [(0u16, den - ones), (1u16, ones)] {
                    if num > 0 {
                        let r = if !paid || y.0 == bit { hit } else { miss };
                        t.push((alphabet.percept_index(Percept::new(bit, r)), num));
                    }
                }
                t.sort_unstable();
                t
            })
            .collect();
        Ok(Self {
            name: format!("bernoulli:{}", rational::exact(&theta)),
            alphabet,
            params: vec![theta],
            den,
            tables,
        })
    }

    /// Arm `y` pays reward 1 with probability `thetas[y]`; the regular part is empty.
    pub fn bandit(thetas: Vec<Rational>) -> Result<Self> {
        if thetas.is_empty() || thetas.len() > u16::MAX as usize {
            return Err(Error::Argument("bandits need at least one arm".into()));
        }
        let alphabet = Arc::new(Alphabet::bandit(thetas.len() as u16));
        let mut den = 1u64;
        for t in &thetas {
            den = den.lcm(&check_theta(t)?);
        }
        let (zero, one) = (reward_index(&alphabet, 0)?, reward_index(&alphabet, 1)?);
        let tables = thetas
            .iter()
            .map(|t| {
                let hit = (t * Rational::from_integer(BigInt::from(den)))
                    .to_integer()
                    .to_u64()
                    .expect("fits");
                let mut row = Vec::with_capacity(2);
                if den - hit > 0 {
                    row.push((alphabet.percept_index(Percept::new(0, zero)), den - hit));
                }
                if hit > 0 {
                    row.push((alphabet.percept_index(Percept::new(0, one)), hit));
                }
                row.sort_unstable();
                row
            })
            .collect();
        let name = format!(
            "bandit:{}",
            thetas.iter().map(rational::exact).collect::<Vec<_>>().join(",")
        );
        Ok(Self {
            name,
            alphabet,
            params: thetas,
            den,
            tables,
        })
    }

    pub fn params(&self) -> &[Rational] {
        &self.params
    }

    pub fn alphabet_arc(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    /// Whether both describe the same measure.
    pub fn same_measure(&self, other: &IidEnv) -> bool {
        if self.alphabet != other.alphabet {
            return false;
        }
        self.tables.iter().zip(&other.tables).all(|(a, b)| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(&(xa, na), &(xb, nb))| {
                    xa == xb && u128::from(na) * u128::from(other.den) == u128::from(nb) * u128::from(self.den)
                })
        })
    }
}

impl fmt::Debug for IidEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Hypothesis for IidEnv {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial_state(&self) -> u32 {
        0
    }

    fn denominator(&self) -> u64 {
        self.den
    }

    fn percept_table(&self, _state: u32, action: Action, out: &mut Vec<(u16, u64)>) {
        out.extend_from_slice(&self.tables[action.0 as usize]);
    }

    fn next_state(&self, _state: u32, _action: Action, _percept: u16) -> u32 {
        0
    }
}

impl Environment for IidEnv {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn as_iid(&self) -> Option<&IidEnv> {
        Some(self)
    }
}

/// A deterministic environment backed by a class program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberEnv(pub ChronProgram);

impl Hypothesis for MemberEnv {
    fn alphabet(&self) -> &Alphabet {
        self.0.alphabet()
    }

    fn initial_state(&self) -> u32 {
        self.0.initial_state()
    }

    fn denominator(&self) -> u64 {
        1
    }

    fn percept_table(&self, state: u32, action: Action, out: &mut Vec<(u16, u64)>) {
        self.0.percept_table(state, action, out)
    }

    fn next_state(&self, state: u32, action: Action, percept: u16) -> u32 {
        self.0.next_state(state, action, percept)
    }
}

impl Environment for MemberEnv {
    fn name(&self) -> String {
        format!("member:{}", self.0.code())
    }

    fn as_program(&self) -> Option<&ChronProgram> {
        Some(&self.0)
    }
}

/// State of `h` after replaying its completed cycles.
pub fn state_after<H: Hypothesis + ?Sized>(hyp: &H, h: &History) -> u32 {
    let alphabet = hyp.alphabet();
    h.cycles().iter().fold(hyp.initial_state(), |s, &(y, x)| {
        hyp.next_state(s, y, alphabet.percept_index(x))
    })
}

/// Exact `mu(yx_{<k} y_k x_k)` for every percept `x_k`, indexed densely.
pub fn mu_conditional<E: Environment + ?Sized>(env: &E, h: &History, y: Action) -> Result<Vec<Rational>> {
    env.alphabet().check_action(y)?;
    let mut table = Vec::new();
    env.percept_table(state_after(env, h), y, &mut table);
    let den = BigInt::from(env.denominator());
    let mut dist = vec![Rational::zero(); env.alphabet().percepts() as usize];
    for (x, num) in table {
        dist[x as usize] = Rational::new(BigInt::from(num), den.clone());
    }
    Ok(dist)
}

/// Draws `x_k ~ mu(. | h, y)`. Point masses leave `rng` untouched.
pub fn sample_percept<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    h: &History,
    y: Action,
    rng: &mut R,
) -> Percept {
    sample_from_state(env, state_after(env, h), y, rng)
}

pub(crate) fn sample_from_state<E: Hypothesis + ?Sized, R: Rng + ?Sized>(
    env: &E,
    state: u32,
    y: Action,
    rng: &mut R,
) -> Percept {
    let mut table = Vec::with_capacity(4);
    env.percept_table(state, y, &mut table);
    let alphabet = env.alphabet();
    if let [(x, _)] = table.as_slice() {
        return alphabet.percept(*x);
    }
    let mut u = rng.gen_range(0..env.denominator());
    for &(x, num) in &table {
        if u < num {
            return alphabet.percept(x);
        }
        u -= num;
    }
    unreachable!("percept table does not sum to its denominator")
}

/// Command-line environment description: `bernoulli:THETA`, `bandit:T1,T2,...`
/// or `member:BITS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvSpec {
    Bernoulli(Rational),
    Bandit(Vec<Rational>),
    Member(Bits),
}

impl EnvSpec {
    /// Agent-setting alphabet for this family.
    pub fn agent_alphabet(&self) -> Alphabet {
        match self {
            EnvSpec::Bernoulli(_) | EnvSpec::Member(_) => Alphabet::agent_default(),
            EnvSpec::Bandit(t) => Alphabet::bandit(t.len() as u16),
        }
    }

    pub fn build(&self, alphabet: Arc<Alphabet>) -> Result<Arc<dyn Environment>> {
        Ok(match self {
            EnvSpec::Bernoulli(t) => Arc::new(IidEnv::bernoulli_seq(alphabet, t.clone())?),
            EnvSpec::Bandit(t) => Arc::new(IidEnv::bandit(t.clone())?),
            EnvSpec::Member(bits) => Arc::new(MemberEnv(crate::machine::decode(&alphabet, bits)?)),
        })
    }
}

impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("unrecognised environment {s:?}")))?;
        match kind {
            "bernoulli" => Ok(EnvSpec::Bernoulli(rational::parse(args)?)),
            "bandit" => Ok(EnvSpec::Bandit(
                args.split(',').map(rational::parse).collect::<Result<_>>()?,
            )),
            "member" => Ok(EnvSpec::Member(args.parse()?)),
            _ => Err(Error::Argument(format!("unrecognised environment {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent() -> Arc<Alphabet> {
        Arc::new(Alphabet::agent_default())
    }

    #[test]
    fn member_env_is_point_mass() {
        let q = ChronProgram::alternator(agent(), Percept::new(0, 1), Percept::new(1, 0)).unwrap();
        let env = MemberEnv(q);
        let h = History::from_cycles(agent(), [(Action(0), Percept::new(0, 1))]).unwrap();
        let dist = mu_conditional(&env, &h, Action(1)).unwrap();
        let idx = agent().percept_index(Percept::new(1, 0)) as usize;
        for (i, p) in dist.iter().enumerate() {
            assert_eq!(*p, if i == idx { int(1) } else { int(0) });
        }
    }

    #[test]
    fn bernoulli_table_pays_for_matching_guess() {
        let env = IidEnv::bernoulli_seq(agent(), rat(4, 5)).unwrap();
        let h = History::new(agent());
        let a = agent();
        let dist = mu_conditional(&env, &h, Action(1)).unwrap();
        assert_eq!(dist[a.percept_index(Percept::new(1, 1)) as usize], rat(4, 5));
        assert_eq!(dist[a.percept_index(Percept::new(0, 0)) as usize], rat(1, 5));
        let dist = mu_conditional(&env, &h, Action(0)).unwrap();
        assert_eq!(dist[a.percept_index(Percept::new(1, 0)) as usize], rat(4, 5));
        assert_eq!(dist[a.percept_index(Percept::new(0, 1)) as usize], rat(1, 5));
    }

    #[test]
    fn bandit_arm_probabilities() {
        let env = IidEnv::bandit(vec![rat(1, 5), rat(4, 5)]).unwrap();
        let h = History::new(env.alphabet_arc().clone());
        let dist = mu_conditional(&env, &h, Action(1)).unwrap();
        assert_eq!(dist, vec![rat(1, 5), rat(4, 5)]);
        assert!(mu_conditional(&env, &h, Action(2)).is_err());
    }

    #[test]
    fn tables_are_measures() {
        let envs: Vec<Box<dyn Environment>> = vec![
            Box::new(IidEnv::bernoulli_seq(agent(), rat(3, 7)).unwrap()),
            Box::new(IidEnv::bernoulli_seq(agent(), int(1)).unwrap()),
            Box::new(IidEnv::bandit(vec![rat(1, 3), int(0), rat(9, 10)]).unwrap()),
            Box::new(MemberEnv(ChronProgram::echo(agent()).unwrap())),
        ];
        for env in &envs {
            let h = History::new(Arc::new(env.alphabet().clone()));
            for y in env.alphabet().all_actions() {
                let total: Rational = mu_conditional(env.as_ref(), &h, y).unwrap().into_iter().sum();
                assert!(total.is_one(), "{}", env.name());
            }
        }
    }

    #[test]
    fn member_sampling_leaves_rng_untouched() {
        let env = MemberEnv(ChronProgram::echo(agent()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let before = rng.clone();
        let x = sample_percept(&env, &History::new(agent()), Action(1), &mut rng);
        assert_eq!(x, Percept::new(1, 0));
        assert_eq!(rng, before);
    }

    #[test]
    fn degenerate_bernoulli_always_one() {
        let env = IidEnv::bernoulli_seq(agent(), int(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = History::new(agent());
        for _ in 0..50 {
            assert_eq!(sample_percept(&env, &h, Action(0), &mut rng).regular, 1);
        }
    }

    #[test]
    fn bernoulli_half_replay_is_frozen() {
        let env = IidEnv::bernoulli_seq(agent(), rat(1, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let h = History::new(agent());
        let bits: String = (0..10)
            .map(|_| if sample_percept(&env, &h, Action(0), &mut rng).regular == 1 { '1' } else { '0' })
            .collect();
        assert_eq!(bits, GOLDEN_BERNOULLI_HALF_SEED_2024);
    }

    const GOLDEN_BERNOULLI_HALF_SEED_2024: &str = "0110111111";

    #[test]
    fn parses_env_specs() {
        assert_eq!("bernoulli:13/16".parse::<EnvSpec>().unwrap(), EnvSpec::Bernoulli(rat(13, 16)));
        assert_eq!(
            "bandit:0.2,0.8".parse::<EnvSpec>().unwrap(),
            EnvSpec::Bandit(vec![rat(1, 5), rat(4, 5)])
        );
        assert!("member:0000x0".parse::<EnvSpec>().is_err());
        assert!("coin:1".parse::<EnvSpec>().is_err());
    }
}

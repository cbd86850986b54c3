//! The enumerated hypothesis class: transducers plus an optional parametric
//! family of stochastic members.
//!
//! Stochastic members carry the tag bit `1`, which keeps them prefix-free
//! with respect to transducer codes (tag `0`):
//!
//! * Bernoulli family: `1` then 5 bits `k <= 16`, `theta = k/16` (6 bits).
//! * Bandit family: `1` then 4 bits `k <= 10` per arm, `theta_arm = k/10`.

use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::alphabet::{Action, Alphabet};
use crate::envs::{Environment, IidEnv};
use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;
use crate::machine::{self, BitReader, Bits, ChronProgram, ProgramEnumerator};
use crate::rational::{self, Rational};

const BERNOULLI_BITS: u32 = 5;
const BERNOULLI_GRID: u32 = 16;
const BANDIT_BITS: u32 = 4;
const BANDIT_GRID: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    None,
    /// `theta in {k/16}`; needs a binary regular part.
    Bernoulli,
    /// `theta in {k/10}` per arm; needs the bandit alphabet.
    Bandit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassSpec {
    pub max_code_len: usize,
    pub max_states: u16,
    pub family: Family,
}

impl ClassSpec {
    pub fn new(max_code_len: usize, family: Family) -> Self {
        Self {
            max_code_len,
            max_states: machine::MAX_STATES,
            family,
        }
    }
}

/// A class member: a deterministic program or a stochastic family member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member {
    Program(ChronProgram),
    Stochastic { code: Bits, env: IidEnv },
}

impl Member {
    pub fn code(&self) -> &Bits {
        match self {
            Member::Program(q) => q.code(),
            Member::Stochastic { code, .. } => code,
        }
    }

    pub fn code_len(&self) -> usize {
        self.code().len()
    }

    /// State count for transducers, 1 for memoryless members.
    pub fn states(&self) -> u16 {
        match self {
            Member::Program(q) => q.states(),
            Member::Stochastic { .. } => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Member::Program(q) => format!("program:{}", q.code()),
            Member::Stochastic { env, .. } => env.name(),
        }
    }

    /// `rho_q(y x_{1:n})`, computed directly from the member's tables.
    pub fn likelihood(&self, actions: &[Action], percepts: &[crate::alphabet::Percept]) -> Rational {
        match self {
            Member::Program(q) => match machine::run(q, actions, 1) {
                machine::RunOutcome::Percepts(xs) if xs == percepts => Rational::one(),
                _ => Rational::zero(),
            },
            Member::Stochastic { env, .. } => {
                let alphabet = env.alphabet();
                let mut p = Rational::one();
                let mut table = Vec::new();
                for (&y, &x) in actions.iter().zip(percepts) {
                    table.clear();
                    env.percept_table(0, y, &mut table);
                    let xi = alphabet.percept_index(x);
                    match table.iter().find(|e| e.0 == xi) {
                        Some(&(_, num)) => {
                            p *= Rational::new(BigInt::from(num), BigInt::from(env.denominator()))
                        }
                        None => return Rational::zero(),
                    }
                }
                p
            }
        }
    }

    /// The member's measure as a stand-alone environment.
    pub fn environment(&self) -> Arc<dyn Environment> {
        match self {
            Member::Program(q) => Arc::new(crate::envs::MemberEnv(q.clone())),
            Member::Stochastic { env, .. } => Arc::new(env.clone()),
        }
    }
}

impl Hypothesis for Member {
    fn alphabet(&self) -> &Alphabet {
        match self {
            Member::Program(q) => Hypothesis::alphabet(q),
            Member::Stochastic { env, .. } => env.alphabet(),
        }
    }

    fn initial_state(&self) -> u32 {
        0
    }

    fn denominator(&self) -> u64 {
        match self {
            Member::Program(_) => 1,
            Member::Stochastic { env, .. } => env.denominator(),
        }
    }

    fn percept_table(&self, state: u32, action: Action, out: &mut Vec<(u16, u64)>) {
        match self {
            Member::Program(q) => q.percept_table(state, action, out),
            Member::Stochastic { env, .. } => env.percept_table(state, action, out),
        }
    }

    fn next_state(&self, state: u32, action: Action, percept: u16) -> u32 {
        match self {
            Member::Program(q) => q.next_state(state, action, percept),
            Member::Stochastic { .. } => 0,
        }
    }
}

fn check_family(alphabet: &Alphabet, family: Family) -> Result<()> {
    match family {
        Family::None => Ok(()),
        Family::Bernoulli if alphabet.regular() == 2 => Ok(()),
        Family::Bandit if alphabet.regular() == 1 && alphabet.rewards().len() == 2 => Ok(()),
        _ => Err(Error::Argument(format!(
            "family {family:?} does not fit the alphabet"
        ))),
    }
}

fn family_member(alphabet: &Arc<Alphabet>, family: Family, ks: &[u32]) -> Result<Member> {
    let mut code = Bits::new();
    code.push(true);
    let env = match family {
        Family::None => return Err(Error::MalformedCode("class has no stochastic family".into())),
        Family::Bernoulli => {
            code.push_field(ks[0], BERNOULLI_BITS);
            IidEnv::bernoulli_seq(alphabet.clone(), rational::rat(ks[0].into(), BERNOULLI_GRID.into()))?
        }
        Family::Bandit => {
            for &k in ks {
                code.push_field(k, BANDIT_BITS);
            }
            IidEnv::bandit(ks.iter().map(|&k| rational::rat(k.into(), BANDIT_GRID.into())).collect())?
        }
    };
    Ok(Member::Stochastic { code, env })
}

fn family_code_len(alphabet: &Alphabet, family: Family) -> usize {
    match family {
        Family::None => usize::MAX,
        Family::Bernoulli => 1 + BERNOULLI_BITS as usize,
        Family::Bandit => 1 + BANDIT_BITS as usize * alphabet.actions() as usize,
    }
}

fn family_members(alphabet: &Arc<Alphabet>, family: Family) -> Result<Vec<Member>> {
    match family {
        Family::None => Ok(Vec::new()),
        Family::Bernoulli => (0..=BERNOULLI_GRID)
            .map(|k| family_member(alphabet, family, &[k]))
            .collect(),
        Family::Bandit => {
            let arms = alphabet.actions() as usize;
            let mut out = Vec::new();
            let mut ks = vec![0u32; arms];
            loop {
                out.push(family_member(alphabet, family, &ks)?);
                let mut i = arms;
                loop {
                    if i == 0 {
                        return Ok(out);
                    }
                    i -= 1;
                    ks[i] += 1;
                    if ks[i] <= BANDIT_GRID {
                        break;
                    }
                    ks[i] = 0;
                }
            }
        }
    }
}

/// Decodes a member of the class described by `alphabet` and `family`.
pub fn decode_member(alphabet: &Arc<Alphabet>, family: Family, bits: &Bits) -> Result<Member> {
    let mut r = BitReader::new(bits);
    if !bits.as_slice().first().copied().unwrap_or(false) {
        return machine::decode(alphabet, bits).map(Member::Program);
    }
    r.bit()?;
    let (width, grid, fields) = match family {
        Family::None => return Err(Error::MalformedCode("class has no stochastic family".into())),
        Family::Bernoulli => (BERNOULLI_BITS, BERNOULLI_GRID, 1),
        Family::Bandit => (BANDIT_BITS, BANDIT_GRID, alphabet.actions() as usize),
    };
    let ks = (0..fields)
        .map(|_| {
            let k = r.field(width)?;
            if k > grid {
                Err(Error::MalformedCode(format!("family parameter {k} > {grid}")))
            } else {
                Ok(k)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    family_member(alphabet, family, &ks)
}

/// A finite, prefix-free hypothesis class with prior weights `2^-l(q)`.
#[derive(Debug, Clone)]
pub struct ProgramClass {
    alphabet: Arc<Alphabet>,
    family: Family,
    members: Vec<Member>,
    max_len: usize,
    den: u64,
}

impl ProgramClass {
    /// All members with code length at most `spec.max_code_len`, shortest first.
    pub fn build(alphabet: Arc<Alphabet>, spec: &ClassSpec) -> Result<Self> {
        check_family(&alphabet, spec.family)?;
        let mut members: Vec<Member> =
            ProgramEnumerator::new(alphabet.clone(), spec.max_code_len, spec.max_states)
                .map(Member::Program)
                .collect();
        if family_code_len(&alphabet, spec.family) <= spec.max_code_len {
            members.extend(family_members(&alphabet, spec.family)?);
        }
        members.sort_by(|a, b| a.code().code_order(b.code()));
        Self::assemble(alphabet, spec.family, members)
    }

    /// A hand-picked class. Codes must be distinct and satisfy Kraft.
    pub fn from_members(alphabet: Arc<Alphabet>, members: Vec<Member>) -> Result<Self> {
        let family = members
            .iter()
            .find_map(|m| match m {
                Member::Stochastic { env, .. } if env.alphabet().regular() == 1 => Some(Family::Bandit),
                Member::Stochastic { .. } => Some(Family::Bernoulli),
                _ => None,
            })
            .unwrap_or(Family::None);
        Self::assemble(alphabet, family, members)
    }

    fn assemble(alphabet: Arc<Alphabet>, family: Family, members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Argument("empty hypothesis class".into()));
        }
        for m in &members {
            if Hypothesis::alphabet(m) != alphabet.as_ref() {
                return Err(Error::Argument(format!("{} uses another alphabet", m.label())));
            }
        }
        let mut codes: Vec<&Bits> = members.iter().map(Member::code).collect();
        codes.sort();
        if codes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("duplicate member codes".into()));
        }
        let max_len = members.iter().map(Member::code_len).max().unwrap_or(0);
        let den = members.iter().fold(1u64, |acc, m| acc.lcm(&m.denominator()));
        let class = Self {
            alphabet,
            family,
            members,
            max_len,
            den,
        };
        if class.kraft_sum() > Rational::one() {
            return Err(Error::Argument("member codes violate the Kraft inequality".into()));
        }
        Ok(class)
    }

    /// The first `n` members (in class order).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::assemble(
            self.alphabet.clone(),
            self.family,
            self.members.iter().take(n).cloned().collect(),
        )
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Member {
        &self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_code_len(&self) -> usize {
        self.max_len
    }

    /// Least common denominator of every member's probability tables.
    pub fn denominator(&self) -> u64 {
        self.den
    }

    /// `2^-l(q)`.
    pub fn prior(&self, i: usize) -> Rational {
        Rational::new(
            BigInt::one(),
            BigInt::one() << self.members[i].code_len(),
        )
    }

    /// `2^(L_max - l(q))`, the prior over the common denominator `2^L_max`.
    pub fn prior_numerator(&self, i: usize) -> BigUint {
        BigUint::one() << (self.max_len - self.members[i].code_len())
    }

    /// `sum_q 2^-l(q)`, exact.
    pub fn kraft_sum(&self) -> Rational {
        let num: BigUint = (0..self.len()).map(|i| self.prior_numerator(i)).sum();
        rational::from_biguints(&num, &(BigUint::one() << self.max_len))
    }

    pub fn decode(&self, bits: &Bits) -> Result<Member> {
        decode_member(&self.alphabet, self.family, bits)
    }

    pub fn position(&self, code: &Bits) -> Option<usize> {
        self.members.iter().position(|m| m.code() == code)
    }

    /// Index of the member whose measure equals `env`, if any.
    pub fn find(&self, env: &dyn Environment) -> Option<usize> {
        if let Some(q) = env.as_program() {
            return self.position(q.code());
        }
        let iid = env.as_iid()?;
        self.members.iter().position(|m| match m {
            Member::Stochastic { env: e, .. } => e.same_measure(iid),
            Member::Program(_) => false,
        })
    }

    /// Members ordered by code, a sanity helper for dumps.
    pub fn is_code_ordered(&self) -> bool {
        self.members
            .windows(2)
            .all(|w| w[0].code().code_order(w[1].code()) == Ordering::Less)
    }
}

//! Binary sequence prediction with exact expected-error accounting.
//!
//! Sequences live in the prediction alphabet (one dummy action, regular part
//! `{0, 1}`, a single zero reward), so symbol `b` is percept index `b` and the
//! mixture machinery is reused unchanged.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::Serialize;

use crate::alphabet::{Action, Alphabet};
use crate::belief::{Kernel, Particle};
use crate::class::ProgramClass;
use crate::envs::{self, Environment};
use crate::error::{Error, Result};
use crate::history::History;
use crate::mixture::{self, MixtureState};
use crate::prefix::{self, NodeView};
use crate::rational::{self, Rational};

/// The measure a predictor is built from.
#[derive(Clone, Copy)]
pub enum Rho<'a> {
    True(&'a dyn Environment),
    Mixture(&'a MixtureState),
}

/// `SP_rho` predicts `x_n` with probability `rho(x_n | x_{<n})`; `SP Theta_rho`
/// puts all mass on the most probable symbol, ties going to the smaller one.
#[derive(Clone, Copy)]
pub enum PredictorKind<'a> {
    Probabilistic(Rho<'a>),
    Deterministic(Rho<'a>),
}

impl<'a> PredictorKind<'a> {
    fn rho(&self) -> Rho<'a> {
        match *self {
            PredictorKind::Probabilistic(r) | PredictorKind::Deterministic(r) => r,
        }
    }

    pub fn id(&self) -> String {
        let rho = match self.rho() {
            Rho::True(e) => e.name(),
            Rho::Mixture(m) => format!("xi[{}]", m.class().len()),
        };
        match self {
            PredictorKind::Probabilistic(_) => rho,
            PredictorKind::Deterministic(_) => format!("theta({rho})"),
        }
    }
}

impl Rho<'_> {
    fn alphabet(&self) -> &Alphabet {
        match self {
            Rho::True(e) => e.alphabet(),
            Rho::Mixture(m) => m.class().alphabet(),
        }
    }

    fn kernel(&self) -> Kernel<'_> {
        match *self {
            Rho::True(e) => Kernel::single(e),
            Rho::Mixture(m) => m.kernel(),
        }
    }

    fn root(&self) -> Result<Vec<Particle>> {
        match *self {
            Rho::True(e) => Ok(vec![Particle {
                member: 0,
                state: e.initial_state(),
                weight: BigUint::from(1u8),
            }]),
            Rho::Mixture(m) => {
                if m.history().completed() != 0 {
                    return Err(Error::Argument("predictor mixtures start unconditioned".into()));
                }
                Ok(m.belief())
            }
        }
    }
}

fn check_binary(alphabet: &Alphabet) -> Result<()> {
    if alphabet.actions() != 1 || alphabet.regular() != 2 || alphabet.rewards().len() != 1 {
        return Err(Error::Argument("prediction needs the binary prediction alphabet".into()));
    }
    Ok(())
}

fn sequence(alphabet: &Arc<Alphabet>, xs: &[u16]) -> Result<History> {
    History::from_cycles(
        alphabet.clone(),
        xs.iter().map(|&b| (Action(0), alphabet.percept(b))),
    )
}

/// Index of the largest entry, smallest index on ties.
fn argmax<T: Ord>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// The predictive table over the next symbol given `xs`.
pub fn predict(kind: PredictorKind<'_>, xs: &[u16]) -> Result<Vec<Rational>> {
    let rho = kind.rho();
    let alphabet = Arc::new(rho.alphabet().clone());
    check_binary(&alphabet)?;
    if xs.iter().any(|&b| b > 1) {
        return Err(Error::Argument("symbols are 0 or 1".into()));
    }
    let h = sequence(&alphabet, xs)?;
    let table: Vec<Rational> = match rho {
        Rho::True(e) => {
            let mut p = Rational::from_integer(1.into());
            for (k, &b) in xs.iter().enumerate() {
                let prefix = sequence(&alphabet, &xs[..k])?;
                p *= &envs::mu_conditional(e, &prefix, Action(0))?[b as usize];
            }
            if p.is_zero() {
                return Err(Error::ZeroMass);
            }
            envs::mu_conditional(e, &h, Action(0))?
        }
        Rho::Mixture(m) => {
            let c = m.conditioned_on(&h)?;
            alphabet
                .all_percepts()
                .map(|x| c.xi_conditional(Action(0), x))
                .collect::<Result<_>>()?
        }
    };
    Ok(match kind {
        PredictorKind::Probabilistic(_) => table,
        PredictorKind::Deterministic(_) => {
            let best = argmax(&table);
            (0..table.len())
                .map(|i| rational::int(i64::from(i == best)))
                .collect()
        }
    })
}

/// Cumulative expected error counts `E_1 .. E_n` of one predictor under `mu`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorLedger {
    pub mu_id: String,
    pub rho_id: String,
    #[serde(skip)]
    pub cumulative: Vec<Rational>,
}

impl ErrorLedger {
    pub fn horizon(&self) -> usize {
        self.cumulative.len()
    }

    /// `E_n`; `E_0 = 0`.
    pub fn at(&self, n: usize) -> Rational {
        if n == 0 {
            Rational::zero()
        } else {
            self.cumulative[n - 1].clone()
        }
    }
}

/// `sum_x mu(x_{<k} x)(1 - rho(x | x_{<k}))` at one prefix. A predictor
/// whose measure has no mass left on the prefix refuses to predict, which
/// counts as an error.
fn error_term(v: &NodeView<'_>, deterministic: bool) -> Result<Rational> {
    let a = |x: usize| v.mu_table.iter().find(|e| e.0 as usize == x).map_or(0, |e| e.1);
    let dmu = BigInt::from(v.mu_den);
    let mu_mass = BigInt::from(v.mu_mass.clone());
    let below = num_traits::pow(dmu.clone(), v.cycle);
    if v.rho_mass.is_zero() {
        return Ok(Rational::new(mu_mass * &dmu, below));
    }
    if deterministic {
        let best = argmax(v.rho_children);
        return Ok(Rational::new(mu_mass * (&dmu - a(best)), below));
    }
    let scale = BigInt::from(v.rho_mass * v.rho_den);
    let hit: BigInt = v
        .rho_children
        .iter()
        .enumerate()
        .map(|(x, m)| BigInt::from(m.clone()) * a(x))
        .sum();
    Ok(Rational::new(mu_mass * (&dmu * &scale - hit), below * scale))
}

/// Exact `E_{k rho}` for `k = 1..=n` by summation over every prefix.
pub fn expected_errors(
    mu: &dyn Environment,
    kind: PredictorKind<'_>,
    n: usize,
    budget: usize,
) -> Result<ErrorLedger> {
    check_binary(mu.alphabet())?;
    let rho = kind.rho();
    check_binary(rho.alphabet())?;
    let kernel = rho.kernel();
    let deterministic = matches!(kind, PredictorKind::Deterministic(_));
    let mut per_cycle = vec![Rational::zero(); n];
    prefix::walk(mu, &kernel, rho.root()?, &|_| Action(0), n, budget, &mut |v| {
        per_cycle[v.cycle - 1] += error_term(v, deterministic)?;
        Ok(())
    })?;
    let mut acc = Rational::zero();
    let cumulative = per_cycle
        .into_iter()
        .map(|e| {
            acc += e;
            acc.clone()
        })
        .collect();
    Ok(ErrorLedger {
        mu_id: mu.name(),
        rho_id: kind.id(),
        cumulative,
    })
}

/// One row of the error-bound report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub mu_id: String,
    pub n: usize,
    #[serde(serialize_with = "rational::serialize")]
    pub e_mu: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub e_xi: Rational,
    pub h: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundRow {
    pub fn lhs(&self) -> Rational {
        &self.e_xi - &self.e_mu
    }
}

/// Outward rounding applied to the floating right-hand side.
pub const BOUND_SLACK: f64 = 1e-9;

/// `H + sqrt(4 E H + H^2)` with `H = ln 2 * code_len`, rounded outward.
pub fn error_bound_rhs(e_mu: &Rational, code_len: usize) -> (f64, f64) {
    let h = std::f64::consts::LN_2 * code_len as f64;
    let e = rational::to_f64(e_mu);
    (h, h + (4.0 * e * h + h * h).sqrt() + BOUND_SLACK)
}

/// `E_{n Theta_xi} - E_{n Theta_mu} <= H + sqrt(4 E_{n Theta_mu} H + H^2)` for
/// every `n' <= n`, where `mu` must be a member of the mixture's class.
pub fn check_error_bound(
    xi: &MixtureState,
    mu: &dyn Environment,
    n: usize,
    budget: usize,
) -> Result<Vec<BoundRow>> {
    let class = xi.class();
    let idx = class
        .find(mu)
        .ok_or_else(|| Error::NotApplicable(format!("{} is not in the class", mu.name())))?;
    let code_len = class.member(idx).code_len();
    let e_mu = expected_errors(mu, PredictorKind::Deterministic(Rho::True(mu)), n, budget)?;
    let e_xi = expected_errors(mu, PredictorKind::Deterministic(Rho::Mixture(xi)), n, budget)?;
    Ok((1..=n)
        .map(|k| {
            let (em, ex) = (e_mu.at(k), e_xi.at(k));
            let (h, rhs) = error_bound_rhs(&em, code_len);
            let holds = rational::to_f64(&(&ex - &em)) <= rhs;
            BoundRow {
                mu_id: mu.name(),
                n: k,
                e_mu: em,
                e_xi: ex,
                h,
                rhs,
                holds,
            }
        })
        .collect())
}

/// `sum_{k<=n} sum_{x_{<k}} mu(x_{<k}) sum_x (xi(x | x_{<k}) - mu(x | x_{<k}))^2`.
pub fn sp_distance_sum(xi: &MixtureState, mu: &dyn Environment, n: usize, budget: usize) -> Result<Rational> {
    check_binary(mu.alphabet())?;
    xi.squared_distance_sum(mu, &[Action(0)], n, budget)
}

/// Partial sums of [`sp_distance_sum`] for `k = 1..=n` from a single walk.
pub fn sp_distance_profile(
    xi: &MixtureState,
    mu: &dyn Environment,
    n: usize,
    budget: usize,
) -> Result<Vec<Rational>> {
    check_binary(mu.alphabet())?;
    let kernel = xi.kernel();
    let percepts = kernel.percepts();
    let mut per_cycle = vec![Rational::zero(); n];
    prefix::walk(mu, &kernel, Rho::Mixture(xi).root()?, &|_| Action(0), n, budget, &mut |v| {
        per_cycle[v.cycle - 1] += mixture::squared_term(v, percepts)?;
        Ok(())
    })?;
    let mut acc = Rational::zero();
    Ok(per_cycle
        .into_iter()
        .map(|d| {
            acc += d;
            acc.clone()
        })
        .collect())
}

/// The class used for prediction experiments: all programs and Bernoulli
/// members up to `max_code_len` bits over the prediction alphabet.
pub fn prediction_class(max_code_len: usize) -> Result<Arc<ProgramClass>> {
    use crate::class::{ClassSpec, Family};
    Ok(Arc::new(ProgramClass::build(
        Arc::new(Alphabet::prediction()),
        &ClassSpec::new(max_code_len, Family::Bernoulli),
    )?))
}

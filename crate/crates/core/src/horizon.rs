//! Planning horizons and discounting.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// How far ahead the agent plans in cycle `k` and how future rewards are weighted.
///
/// Discounted kinds are truncated at `depth` cycles, so every kind has a finite
/// effective horizon `m_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HorizonPolicy {
    /// Plan to the fixed final cycle `m`.
    FixedLifespan { m: usize },
    /// Plan `h` cycles ahead: `m_k = k + h - 1`.
    MovingHorizon { h: usize },
    /// Weight `r_i` by `gamma^i`.
    GeometricDiscount { gamma: Rational, depth: usize },
    /// Weight `r_i` by `i^-alpha`. Only integer exponents keep the weights rational.
    PowerDiscount { alpha: u32, depth: usize },
}

impl HorizonPolicy {
    pub fn fixed(m: usize) -> Result<Self> {
        Self::FixedLifespan { m }.validated()
    }

    pub fn moving(h: usize) -> Result<Self> {
        Self::MovingHorizon { h }.validated()
    }

    pub fn geometric(gamma: Rational, depth: usize) -> Result<Self> {
        Self::GeometricDiscount { gamma, depth }.validated()
    }

    pub fn power(alpha: u32, depth: usize) -> Result<Self> {
        Self::PowerDiscount { alpha, depth }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match &self {
            Self::FixedLifespan { m } => *m >= 1,
            Self::MovingHorizon { h } => *h >= 1,
            Self::GeometricDiscount { gamma, depth } => {
                *depth >= 1 && gamma > &Rational::zero() && gamma < &Rational::one()
            }
            Self::PowerDiscount { alpha, depth } => *depth >= 1 && *alpha >= 1,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::Argument(format!("invalid horizon policy {self}")))
        }
    }

    /// Last cycle `m_k` considered when planning in cycle `k`.
    pub fn effective_horizon(&self, k: usize) -> Result<usize> {
        if k == 0 {
            return Err(Error::Argument("cycles are numbered from 1".into()));
        }
        Ok(match self {
            Self::FixedLifespan { m } => {
                if k > *m {
                    return Err(Error::LifespanExceeded { k, m: *m });
                }
                *m
            }
            Self::MovingHorizon { h } => k + h - 1,
            Self::GeometricDiscount { depth, .. } | Self::PowerDiscount { depth, .. } => {
                k + depth - 1
            }
        })
    }

    /// Reward weights for cycles `k..=m_k`.
    pub fn discount_weights(&self, k: usize) -> Result<Vec<Rational>> {
        let m = self.effective_horizon(k)?;
        Ok((k..=m)
            .map(|i| match self {
                Self::FixedLifespan { .. } | Self::MovingHorizon { .. } => Rational::one(),
                Self::GeometricDiscount { gamma, .. } => num_traits::pow(gamma.clone(), i),
                Self::PowerDiscount { alpha, .. } => Rational::new(
                    BigInt::one(),
                    num_traits::pow(BigInt::from(i), *alpha as usize),
                ),
            })
            .collect())
    }

    pub fn is_undiscounted(&self) -> bool {
        matches!(self, Self::FixedLifespan { .. } | Self::MovingHorizon { .. })
    }
}

impl fmt::Display for HorizonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FixedLifespan { m } => write!(f, "fixed:{m}"),
            Self::MovingHorizon { h } => write!(f, "moving:{h}"),
            Self::GeometricDiscount { gamma, depth } => {
                write!(f, "geometric:{},{depth}", rational::exact(gamma))
            }
            Self::PowerDiscount { alpha, depth } => write!(f, "power:{alpha},{depth}"),
        }
    }
}

/// Parses `fixed:M`, `moving:H`, `geometric:GAMMA,DEPTH` or `power:ALPHA,DEPTH`.
impl FromStr for HorizonPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("unrecognised horizon {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match kind {
            "fixed" => Self::fixed(int(args)?),
            "moving" => Self::moving(int(args)?),
            "geometric" => {
                let (g, d) = args.split_once(',').ok_or_else(bad)?;
                Self::geometric(rational::parse(g)?, int(d)?)
            }
            "power" => {
                let (a, d) = args.split_once(',').ok_or_else(bad)?;
                let alpha = a.trim().parse::<u32>().map_err(|_| bad())?;
                Self::power(alpha, int(d)?)
            }
            _ => Err(bad()),
        }
    }
}

//! Agent/environment interaction loops.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::aixitl::PoolState;
use crate::alphabet::{Action, Percept};
use crate::envs::{self, Environment};
use crate::error::{Error, Result};
use crate::history::History;
use crate::horizon::HorizonPolicy;
use crate::mixture::MixtureState;
use crate::planner::{ModelRho, Planner};
use crate::rational::{self, Rational};

/// What a planning agent believes: the true environment (AImu) or a mixture
/// that it re-conditions on every percept (AIxi).
pub enum AgentModel {
    True(Arc<dyn Environment>),
    Mixture(MixtureState),
}

pub enum Agent {
    Planner {
        model: AgentModel,
        horizon: HorizonPolicy,
        planner: Planner,
    },
    RatedPool(Box<PoolState>),
    Scripted(Vec<Action>),
}

impl Agent {
    pub fn mixture(&self) -> Option<&MixtureState> {
        match self {
            Agent::Planner {
                model: AgentModel::Mixture(m),
                ..
            } => Some(m),
            _ => None,
        }
    }
}

/// One completed cycle as seen by observers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    pub k: usize,
    pub action: u16,
    pub percept: u16,
    #[serde(serialize_with = "rational::serialize")]
    pub reward: Rational,
    /// Planner diagnostics; absent for other agents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_policy: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanTrace {
    #[serde(serialize_with = "rational::serialize")]
    pub value: Rational,
    pub node_count: usize,
    pub depth: usize,
    pub action_values: Vec<String>,
}

fn decide(agent: &mut Agent, h: &History, last: Option<Percept>) -> Result<(Action, Option<PlanTrace>, Option<usize>)> {
    match agent {
        Agent::Planner {
            model,
            horizon,
            planner,
        } => {
            let rho = match &*model {
                AgentModel::True(e) => ModelRho::True(e.as_ref()),
                AgentModel::Mixture(m) => ModelRho::Mixture(m),
            };
            let r = planner.optimal_value(rho, h, horizon)?;
            let k = h.completed() + 1;
            let depth = horizon.effective_horizon(k).map_or(0, |m| m + 1 - k);
            let trace = PlanTrace {
                value: r.value,
                node_count: r.node_count,
                depth,
                action_values: r.action_values.iter().map(rational::exact).collect(),
            };
            Ok((r.best_action, Some(trace), None))
        }
        Agent::RatedPool(pool) => {
            let s = pool.pbest_cycle(last)?;
            Ok((s.action, None, Some(s.chosen)))
        }
        Agent::Scripted(script) => {
            let y = script
                .get(h.completed())
                .or(script.last())
                .copied()
                .ok_or_else(|| Error::Argument("empty script".into()))?;
            Ok((y, None, None))
        }
    }
}

fn learn(agent: &mut Agent, y: Action, x: Percept) -> Result<()> {
    if let Agent::Planner {
        model: AgentModel::Mixture(m),
        ..
    } = agent
    {
        m.condition_in_place(y, x).map_err(|e| match e {
            Error::ZeroMass => Error::Argument(format!(
                "every hypothesis is falsified after cycle {}: the environment is outside the class",
                m.history().completed()
            )),
            e => e,
        })?;
    }
    Ok(())
}

/// Runs `m` cycles of `agent` against `env`, calling `observe` after each.
pub fn run_episode<R: Rng + ?Sized>(
    agent: &mut Agent,
    env: &dyn Environment,
    m: usize,
    rng: &mut R,
    observe: &mut dyn FnMut(&CycleRecord, &Agent),
) -> Result<History> {
    if m == 0 {
        return Err(Error::Argument("an episode needs at least one cycle".into()));
    }
    if let Agent::RatedPool(pool) = agent {
        pool.reset();
    }
    let alphabet = Arc::new(env.alphabet().clone());
    let mut h = History::new(alphabet);
    let mut last = None;
    for _ in 0..m {
        let (y, plan, chosen_policy) = decide(agent, &h, last)?;
        let x = envs::sample_percept(env, &h, y, rng);
        h.push_cycle(y, x)?;
        learn(agent, y, x)?;
        last = Some(x);
        let record = CycleRecord {
            k: h.completed(),
            action: y.0,
            percept: env.alphabet().percept_index(x),
            reward: env.alphabet().reward(x).clone(),
            plan,
            chosen_policy,
        };
        observe(&record, agent);
    }
    Ok(h)
}

/// Mean reward over cycles `from..=to` of `h`.
pub fn mean_reward(h: &History, from: usize, to: usize) -> Result<Rational> {
    Ok(h.total_reward(from, to)? / rational::int((to + 1 - from) as i64))
}

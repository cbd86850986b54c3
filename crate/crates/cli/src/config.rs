//! Experiment configuration: defaults, `key=value` files and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use aixi_core::aixitl::{Bounds, SCENARIO_LIFESPAN};
use aixi_core::envs::EnvSpec;
use aixi_core::machine::MAX_STATES;
use aixi_core::HorizonPolicy;

use crate::report::Format;
use crate::LabError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "AIXI_LAB_OUT";
pub const DEFAULT_OUT: &str = "aixi-lab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Predict,
    Plan,
    Agent,
    Aixitl,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Plan => "plan",
            Command::Agent => "agent",
            Command::Aixitl => "aixitl",
            Command::Audit => "audit",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "predict" => Command::Predict,
            "plan" => Command::Plan,
            "agent" => Command::Agent,
            "aixitl" => Command::Aixitl,
            "audit" => Command::Audit,
            _ => return Err(format!("unknown command {s:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    True,
    Mixture,
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "true" | "mu" => Ok(Model::True),
            "mixture" | "xi" => Ok(Model::Mixture),
            _ => Err(format!("unknown model {s:?} (expected true or mixture)")),
        }
    }
}

/// Everything one run depends on. Unset options fall back to per-command
/// defaults in [`ExperimentConfig::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub env: Option<String>,
    pub class_len: Option<usize>,
    pub max_states: Option<u16>,
    pub horizon: Option<String>,
    pub model: Option<Model>,
    pub cycles: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub tier: Option<String>,
    pub budget: Option<usize>,
    pub posterior: Option<bool>,
    pub trace: Option<bool>,
    pub verbose: Option<u8>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    pub env: Option<EnvSpec>,
    pub env_text: Option<String>,
    pub class_len: usize,
    pub max_states: u16,
    pub horizon: HorizonPolicy,
    pub model: Model,
    pub cycles: usize,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub tier: (String, Bounds),
    pub budget: usize,
    pub posterior: bool,
    pub trace: bool,
    pub verbose: u8,
}

fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, LabError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("bad value for {key}: {value:?} ({e})")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, LabError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(usage(format!("bad value for {key}: {value:?}"))),
    }
}

pub fn tier(name: &str) -> Result<Bounds, LabError> {
    Ok(match name {
        "small" => Bounds::small(),
        "medium" => Bounds::medium(),
        "large" => Bounds::large(),
        "bundled" => Bounds::bundled(),
        _ => return Err(usage(format!("unknown tier {name:?}"))),
    })
}

impl ExperimentConfig {
    /// Reads `key=value` lines; `#` starts a comment.
    pub fn from_pairs(text: &str) -> Result<Self, LabError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LabError> {
        match key {
            "command" => self.command = Some(parse(key, value)?),
            "env" => self.env = Some(value.to_string()),
            "class" => self.class_len = Some(parse(key, value)?),
            "states" => self.max_states = Some(parse(key, value)?),
            "horizon" => self.horizon = Some(value.to_string()),
            "model" => self.model = Some(parse(key, value)?),
            "m" => self.cycles = Some(parse(key, value)?),
            "n" => self.n = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(parse(key, value)?),
            "tier" => self.tier = Some(value.to_string()),
            "budget" => self.budget = Some(parse(key, value)?),
            "posterior" => self.posterior = Some(parse_bool(key, value)?),
            "trace" => self.trace = Some(parse_bool(key, value)?),
            "verbose" => self.verbose = Some(parse(key, value)?),
            _ => return Err(usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: ExperimentConfig) -> Self {
        Self {
            command: other.command.or(self.command),
            env: other.env.or(self.env),
            class_len: other.class_len.or(self.class_len),
            max_states: other.max_states.or(self.max_states),
            horizon: other.horizon.or(self.horizon),
            model: other.model.or(self.model),
            cycles: other.cycles.or(self.cycles),
            n: other.n.or(self.n),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            tier: other.tier.or(self.tier),
            budget: other.budget.or(self.budget),
            posterior: other.posterior.or(self.posterior),
            trace: other.trace.or(self.trace),
            verbose: other.verbose.or(self.verbose),
        }
    }

    pub fn validate(&self) -> Result<Resolved, LabError> {
        let command = self
            .command
            .ok_or_else(|| usage("no command given (predict, plan, agent, aixitl or audit)"))?;
        let env = match &self.env {
            Some(text) => Some(text.parse::<EnvSpec>().map_err(|e| usage(e.to_string()))?),
            None if command == Command::Audit => None,
            None => return Err(usage(format!("{} needs --env", command.name()))),
        };
        let lifespan_command = matches!(command, Command::Aixitl | Command::Audit);
        let horizon_text = self.horizon.clone().unwrap_or_else(|| {
            if lifespan_command {
                format!("fixed:{SCENARIO_LIFESPAN}")
            } else {
                "moving:4".to_string()
            }
        });
        let horizon: HorizonPolicy = horizon_text.parse().map_err(|e: aixi_core::Error| usage(e.to_string()))?;
        let cycles = self.cycles.unwrap_or(if lifespan_command { SCENARIO_LIFESPAN } else { 50 });
        let positive = [
            ("class", self.class_len.unwrap_or(12)),
            ("states", usize::from(self.max_states.unwrap_or(MAX_STATES))),
            ("m", cycles),
            ("n", self.n.unwrap_or(16)),
            ("budget", self.budget.unwrap_or(1)),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(usage(format!("{name} must be positive")));
        }
        if self.max_states.unwrap_or(MAX_STATES) > MAX_STATES {
            return Err(usage(format!("states must be at most {MAX_STATES}")));
        }
        if command == Command::Aixitl && !matches!(env, Some(EnvSpec::Bandit(ref t)) if t.len() == 2) {
            return Err(usage("aixitl runs against a two-armed bandit (--env bandit:A,B)"));
        }
        if command == Command::Predict && !matches!(env, Some(EnvSpec::Bernoulli(_) | EnvSpec::Member(_))) {
            return Err(usage("predict needs a bernoulli: or member: environment"));
        }
        let tier_name = self.tier.clone().unwrap_or_else(|| "bundled".into());
        let bounds = tier(&tier_name)?;
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok(Resolved {
            command,
            env,
            env_text: self.env.clone(),
            class_len: self.class_len.unwrap_or(12),
            max_states: self.max_states.unwrap_or(MAX_STATES),
            horizon,
            model: self.model.unwrap_or(Model::Mixture),
            cycles,
            n: self.n.unwrap_or(16),
            seed: self.seed.unwrap_or(0),
            out,
            format: self.format.unwrap_or(Format::Csv),
            tier: (tier_name, bounds),
            budget: self.budget.unwrap_or(1 << 24),
            posterior: self.posterior.unwrap_or(false),
            trace: self.trace.unwrap_or(false),
            verbose: self.verbose.unwrap_or(0),
        })
    }
}

impl Resolved {
    /// Settings that determine the results, one `key=value` per line in key
    /// order. Output location and verbosity are left out.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("command", self.command.name().to_string());
        map.insert("env", self.env_text.clone().unwrap_or_default());
        map.insert("class", self.class_len.to_string());
        map.insert("states", self.max_states.to_string());
        map.insert("horizon", self.horizon.to_string());
        map.insert(
            "model",
            match self.model {
                Model::True => "true",
                Model::Mixture => "mixture",
            }
            .to_string(),
        );
        map.insert("m", self.cycles.to_string());
        map.insert("n", self.n.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("format", self.format.extension().to_string());
        map.insert("tier", self.tier.0.clone());
        map.insert("budget", self.budget.to_string());
        map.insert("posterior", self.posterior.to_string());
        map.insert("trace", self.trace.to_string());
        map.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub mod alphabet;
pub mod belief;
pub mod class;
pub mod envs;
pub mod episode;
pub mod error;
pub mod exec;
pub mod history;
pub mod horizon;
pub mod hypothesis;
pub mod machine;
pub mod mixture;
pub mod planner;
pub mod predictor;
pub mod aixitl;
mod prefix;
pub mod rational;

pub use alphabet::{Action, Alphabet, Percept};
pub use class::{ClassSpec, Family, Member, ProgramClass};
pub use envs::{Environment, IidEnv, MemberEnv};
pub use error::{Error, Result};
pub use exec::Execution;
pub use history::History;
pub use horizon::HorizonPolicy;
pub use hypothesis::Hypothesis;
pub use machine::{Bits, ChronProgram};
pub use mixture::MixtureState;
pub use rational::Rational;
pub use planner::{ModelRho, Planner, Policy, ValueResult};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

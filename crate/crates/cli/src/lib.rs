//! Experiment harness: validated configs, one pipeline per subcommand, and
//! byte-for-byte reproducible artifacts plus a hashed manifest.

pub mod config;
pub mod report;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aixi_core::aixitl::{self, PolicyContext, RatingGrid};
use aixi_core::envs::EnvSpec;
use aixi_core::episode::{run_episode, Agent, AgentModel, CycleRecord};
use aixi_core::predictor::{self, Rho};
use aixi_core::rational::int;
use aixi_core::{
    mixture, Alphabet, ClassSpec, Environment, Execution, Family, History, IidEnv, MemberEnv, MixtureState,
    ModelRho, Planner, ProgramClass,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use config::{Command, ExperimentConfig, Model, Resolved};
pub use report::{emit_report, Cell, Format, Report};

#[derive(Debug)]
pub enum LabError {
    Usage(String),
    Core(aixi_core::Error),
    Io(PathBuf, io::Error),
}

impl LabError {
    /// Usage and model errors exit 2, exhausted budgets 3, I/O failures 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Core(aixi_core::Error::Budget(_)) => 3,
            LabError::Core(_) => 2,
            LabError::Io(..) => 1,
        }
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Usage(msg) => write!(f, "usage: {msg}"),
            LabError::Core(aixi_core::Error::Budget(msg)) => write!(
                f,
                "budget exhausted: {msg}; raise --budget or shrink --class/--horizon"
            ),
            LabError::Core(e) => write!(f, "{e}"),
            LabError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl std::error::Error for LabError {}

impl From<aixi_core::Error> for LabError {
    fn from(e: aixi_core::Error) -> Self {
        LabError::Core(e)
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    /// Artifact file names relative to `out`, in manifest order.
    pub artifacts: Vec<String>,
    /// Zero unless the run itself found a problem (audit violations).
    pub exit_code: i32,
}

struct Artifacts {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path, format: Format) -> Result<Self, LabError> {
        fs::create_dir_all(dir).map_err(|e| LabError::Io(dir.to_path_buf(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    fn report(&mut self, stem: &str, report: &Report) -> Result<(), LabError> {
        let name = format!("{stem}.{}", self.format.extension());
        let path = self.dir.join(&name);
        emit_report(report, &path, self.format).map_err(|e| LabError::Io(path, e))?;
        self.written.push(name);
        Ok(())
    }

    fn jsonl<T: serde::Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), LabError> {
        let text: String = rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable row") + "\n")
            .collect();
        self.raw(name, text.as_bytes())
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| LabError::Io(path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &Resolved) -> String {
    sha256_hex(cfg.canonical().as_bytes())
}

fn class_report(class: &ProgramClass) -> Report {
    let mut r = Report::new(&["code_hex", "length", "states", "label"]);
    for m in class.members() {
        r.push(vec![m.code().to_hex().into(), m.code_len().into(), m.states().into(), m.label().into()]);
    }
    r
}

fn build_class(alphabet: Arc<Alphabet>, cfg: &Resolved, family: Family) -> Result<Arc<ProgramClass>, LabError> {
    let spec = ClassSpec {
        max_code_len: cfg.class_len,
        max_states: cfg.max_states,
        family,
    };
    Ok(Arc::new(ProgramClass::build(alphabet, &spec)?))
}

fn family_for(spec: &EnvSpec) -> Family {
    match spec {
        EnvSpec::Bandit(_) => Family::Bandit,
        EnvSpec::Bernoulli(_) | EnvSpec::Member(_) => Family::Bernoulli,
    }
}

fn log(cfg: &Resolved, msg: impl FnOnce() -> String) {
    if cfg.verbose > 0 {
        eprintln!("aixi-lab: {}", msg());
    }
}

/// Validates `cfg`, runs the matching pipeline and writes its artifacts plus
/// `manifest.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, LabError> {
    let cfg = cfg.validate()?;
    let mut out = Artifacts::create(&cfg.out, cfg.format)?;
    log(&cfg, || format!("{} -> {}", cfg.command.name(), cfg.out.display()));
    let (class_size, exit_code) = match cfg.command {
        Command::Predict => (run_predict(&cfg, &mut out)?, 0),
        Command::Plan => (run_plan(&cfg, &mut out)?, 0),
        Command::Agent => (run_agent(&cfg, &mut out)?, 0),
        Command::Aixitl => (run_aixitl(&cfg, &mut out)?, 0),
        Command::Audit => run_audit(&cfg, &mut out)?,
    };
    write_manifest(&cfg, &mut out, class_size)?;
    Ok(RunSummary {
        out: cfg.out.clone(),
        artifacts: out.written,
        exit_code,
    })
}

fn env_spec(cfg: &Resolved) -> &EnvSpec {
    cfg.env.as_ref().expect("validated: command needs an environment")
}

fn run_predict(cfg: &Resolved, out: &mut Artifacts) -> Result<Option<usize>, LabError> {
    let alphabet = Arc::new(Alphabet::prediction());
    let mu: Box<dyn Environment> = match env_spec(cfg) {
        EnvSpec::Bernoulli(theta) => Box::new(IidEnv::bernoulli_seq(alphabet.clone(), theta.clone())?),
        EnvSpec::Member(bits) => Box::new(MemberEnv(aixi_core::machine::decode(&alphabet, bits)?)),
        EnvSpec::Bandit(_) => unreachable!("validated"),
    };
    let class = build_class(alphabet, cfg, Family::Bernoulli)?;
    let xi = MixtureState::new(class.clone());
    let code_len = class
        .find(mu.as_ref())
        .map(|i| class.member(i).code_len())
        .ok_or_else(|| LabError::Usage(format!("{} is not a member of the l <= {} class", mu.name(), cfg.class_len)))?;

    let mut bounds = Report::new(&["mu", "n", "e_mu/", "e_xi/", "lhs/", "h", "rhs", "holds"]);
    for row in predictor::check_error_bound(&xi, mu.as_ref(), cfg.n, cfg.budget)? {
        bounds.push(vec![
            row.mu_id.clone().into(),
            row.n.into(),
            (&row.e_mu).into(),
            (&row.e_xi).into(),
            row.lhs().into(),
            row.h.into(),
            row.rhs.into(),
            row.holds.into(),
        ]);
    }
    out.report("bounds", &bounds)?;

    let mut distance = Report::new(&["n", "sum/", "bound"]);
    let bound = std::f64::consts::LN_2 * code_len as f64;
    for (k, d) in predictor::sp_distance_profile(&xi, mu.as_ref(), cfg.n, cfg.budget)?.iter().enumerate() {
        distance.push(vec![(k + 1).into(), d.into(), bound.into()]);
    }
    out.report("distance", &distance)?;

    let mut errors = Report::new(&["n", "predictor", "errors/"]);
    let kinds = [
        predictor::PredictorKind::Deterministic(Rho::True(mu.as_ref())),
        predictor::PredictorKind::Deterministic(Rho::Mixture(&xi)),
        predictor::PredictorKind::Probabilistic(Rho::True(mu.as_ref())),
        predictor::PredictorKind::Probabilistic(Rho::Mixture(&xi)),
    ];
    for kind in kinds {
        let ledger = predictor::expected_errors(mu.as_ref(), kind, cfg.n, cfg.budget)?;
        for n in 1..=cfg.n {
            errors.push(vec![n.into(), ledger.rho_id.clone().into(), ledger.at(n).into()]);
        }
    }
    out.report("errors", &errors)?;
    out.report("class", &class_report(&class))?;
    Ok(Some(class.len()))
}

fn run_plan(cfg: &Resolved, out: &mut Artifacts) -> Result<Option<usize>, LabError> {
    let spec = env_spec(cfg);
    let alphabet = Arc::new(spec.agent_alphabet());
    let env = spec.build(alphabet.clone())?;
    let planner = Planner::new(cfg.budget);
    let h = History::new(alphabet.clone());
    let (result, class) = match cfg.model {
        Model::True => (planner.optimal_value(ModelRho::True(env.as_ref()), &h, &cfg.horizon)?, None),
        Model::Mixture => {
            let class = build_class(alphabet, cfg, family_for(spec))?;
            let xi = MixtureState::new(class.clone());
            (planner.optimal_value(ModelRho::Mixture(&xi), &h, &cfg.horizon)?, Some(class))
        }
    };
    let mut plan = Report::new(&["env", "model", "horizon", "value/", "best_action", "node_count"]);
    plan.push(vec![
        env.name().into(),
        model_name(cfg.model).into(),
        cfg.horizon.to_string().into(),
        (&result.value).into(),
        u64::from(result.best_action.0).into(),
        result.node_count.into(),
    ]);
    out.report("plan", &plan)?;
    let mut values = Report::new(&["action", "value/"]);
    for (y, v) in result.action_values.iter().enumerate() {
        values.push(vec![y.into(), v.into()]);
    }
    out.report("action_values", &values)?;
    if let Some(class) = &class {
        out.report("class", &class_report(class))?;
    }
    Ok(class.map(|c| c.len()))
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::True => "true",
        Model::Mixture => "mixture",
    }
}

fn run_agent(cfg: &Resolved, out: &mut Artifacts) -> Result<Option<usize>, LabError> {
    let spec = env_spec(cfg);
    let alphabet = Arc::new(spec.agent_alphabet());
    let env = spec.build(alphabet.clone())?;
    let planner = Planner::new(cfg.budget);
    let (model, class) = match cfg.model {
        Model::True => (AgentModel::True(env.clone()), None),
        Model::Mixture => {
            let class = build_class(alphabet, cfg, family_for(spec))?;
            (AgentModel::Mixture(MixtureState::new(class.clone())), Some(class))
        }
    };
    let mut agent = Agent::Planner {
        model,
        horizon: cfg.horizon.clone(),
        planner,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records: Vec<CycleRecord> = Vec::new();
    let mut posterior = Report::new(&["cycle", "code", "weight/"]);
    let mut posterior_error = None;
    let want_posterior = cfg.posterior;
    run_episode(&mut agent, env.as_ref(), cfg.cycles, &mut rng, &mut |record, agent| {
        records.push(record.clone());
        if let (true, Some(m), None) = (want_posterior, agent.mixture(), &posterior_error) {
            match mixture::posterior_rows(m) {
                Ok(rows) => {
                    for (code, w) in rows {
                        posterior.push(vec![record.k.into(), code.into(), w.into()]);
                    }
                }
                Err(e) => posterior_error = Some(e),
            }
        }
    })?;
    if let Some(e) = posterior_error {
        return Err(e.into());
    }
    log(cfg, || format!("{} cycles done", records.len()));

    let mut history = Report::new(&["k", "action", "percept", "reward/"]);
    let mut total = int(0);
    for r in &records {
        total += &r.reward;
        history.push(vec![r.k.into(), u64::from(r.action).into(), u64::from(r.percept).into(), (&r.reward).into()]);
    }
    out.report("history", &history)?;
    let mut summary = Report::new(&["env", "model", "horizon", "cycles", "seed", "total_reward/", "mean_reward/"]);
    let mean = &total / int(records.len() as i64);
    summary.push(vec![
        env.name().into(),
        model_name(cfg.model).into(),
        cfg.horizon.to_string().into(),
        cfg.cycles.into(),
        cfg.seed.into(),
        total.into(),
        mean.into(),
    ]);
    out.report("summary", &summary)?;
    if cfg.posterior {
        if class.is_none() {
            return Err(LabError::Usage("--posterior needs --model mixture".into()));
        }
        out.report("posterior", &posterior)?;
    }
    if cfg.trace {
        out.jsonl("trace.jsonl", &records)?;
    }
    if let Some(class) = &class {
        out.report("class", &class_report(class))?;
    }
    Ok(class.map(|c| c.len()))
}

fn run_aixitl(cfg: &Resolved, out: &mut Artifacts) -> Result<Option<usize>, LabError> {
    let spec = env_spec(cfg);
    let EnvSpec::Bandit(thetas) = spec else { unreachable!("validated") };
    let alphabet = Arc::new(spec.agent_alphabet());
    let class = build_class(alphabet.clone(), cfg, Family::Bandit)?;
    let grid = RatingGrid::for_horizon(&cfg.horizon, &alphabet.max_reward(), aixitl::RATING_RESOLUTION)?;
    let bounds = cfg.tier.1;
    let ctx = PolicyContext::new(MixtureState::new(class.clone()), cfg.horizon.clone(), grid, bounds.t_tilde)?;
    let mut pool = aixitl::pbest_setup(Arc::new(ctx), bounds, Execution::default())?;
    log(cfg, || format!("pool of {} policies", pool.len()));
    let env = IidEnv::bandit(thetas.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let run = aixitl::run_pbest(&mut pool, &env, cfg.cycles, &mut rng)?;
    out.report("pool", &manifest_report(&pool))?;
    out.jsonl("audit.jsonl", &run.audit)?;
    out.report("class", &class_report(&class))?;
    Ok(Some(class.len()))
}

fn manifest_report(pool: &aixitl::PoolState) -> Report {
    let mut r = Report::new(&["code", "length", "label", "verdict", "depth"]);
    for row in aixitl::pool_manifest(pool) {
        r.push(vec![row.code.into(), row.length.into(), row.label.into(), row.verdict.into(), row.depth.into()]);
    }
    r
}

fn run_audit(cfg: &Resolved, out: &mut Artifacts) -> Result<(Option<usize>, i32), LabError> {
    let mut agreement = Report::new(&["tier", "l_tilde", "t_tilde", "depth", "pool_size", "agree", "cycles", "rate/"]);
    let mut soundness = Report::new(&["tier", "policies", "checks", "violations"]);
    let mut violations = Vec::new();
    let mut class_size = None;
    let mut tiers: Vec<(&str, aixitl::Bounds)> = aixitl::Bounds::tiers().to_vec();
    tiers.push(("bundled", aixitl::Bounds::bundled()));
    for (name, bounds) in tiers {
        let ctx = aixitl::bandit_context(cfg.class_len, bounds.t_tilde)?;
        class_size = Some(ctx.xi.class().len());
        let mut pool = aixitl::pbest_setup(Arc::new(ctx), bounds, Execution::default())?;
        let report = aixitl::audit_soundness(&pool)?;
        let a = aixitl::agreement(&mut pool, name, ChaCha8Rng::seed_from_u64)?;
        log(cfg, || format!("tier {name}: pool {}, agreement {}/{}", a.pool_size, a.agree, a.cycles));
        agreement.push(vec![
            name.into(),
            bounds.l_tilde.into(),
            bounds.t_tilde.into(),
            bounds.depth.into(),
            a.pool_size.into(),
            a.agree.into(),
            a.cycles.into(),
            a.rate().into(),
        ]);
        soundness.push(vec![
            name.into(),
            report.policies.into(),
            report.checks.into(),
            report.violations.len().into(),
        ]);
        violations.extend(report.violations);
    }
    out.report("agreement", &agreement)?;
    out.report("soundness", &soundness)?;
    out.jsonl("violations.jsonl", &violations)?;
    Ok((class_size, i32::from(!violations.is_empty())))
}

fn write_manifest(cfg: &Resolved, out: &mut Artifacts, class_size: Option<usize>) -> Result<(), LabError> {
    let mut artifacts = serde_json::Map::new();
    for name in &out.written {
        let path = out.dir.join(name);
        let bytes = fs::read(&path).map_err(|e| LabError::Io(path, e))?;
        artifacts.insert(name.clone(), serde_json::json!({ "bytes": bytes.len(), "sha256": sha256_hex(&bytes) }));
    }
    let config: serde_json::Map<String, serde_json::Value> = cfg
        .canonical()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v.to_string())))
        .collect();
    let manifest = serde_json::json!({
        "artifacts": artifacts,
        "class_size": class_size,
        "config": config,
        "config_hash": config_hash(cfg),
        "selection_steps": aixitl::SELECTION_STEPS,
        "versions": { "aixi-core": aixi_core::VERSION, "aixi-lab": env!("CARGO_PKG_VERSION") },
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("json");
    text.push('\n');
    let path = out.dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| LabError::Io(path, e))
}

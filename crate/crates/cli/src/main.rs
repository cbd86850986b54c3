use std::path::PathBuf;
use std::process::ExitCode;

use aixi_lab::{run_experiment, ExperimentConfig, LabError};
use clap::Parser;

/// Exact finite-class AIXI experiments.
///
/// Settings come from flags, then `--config FILE` (key=value lines), then
/// defaults. The output directory falls back to $AIXI_LAB_OUT.
#[derive(Debug, Parser)]
#[command(name = "aixi-lab", version)]
struct Cli {
    /// predict, plan, agent, aixitl or audit
    command: Option<String>,
    /// Plain-text key=value file with any of the settings below
    #[arg(long)]
    config: Option<PathBuf>,
    /// bernoulli:THETA, bandit:T1,T2,... or member:BITS
    #[arg(long)]
    env: Option<String>,
    /// Maximum code length of class members
    #[arg(long)]
    class: Option<String>,
    /// Maximum states per program
    #[arg(long)]
    states: Option<String>,
    /// fixed:M, moving:H, geometric:G,D or power:A,D
    #[arg(long)]
    horizon: Option<String>,
    /// true or mixture
    #[arg(long)]
    model: Option<String>,
    /// Cycles to run
    #[arg(long)]
    m: Option<String>,
    /// Prediction steps
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// csv or jsonl
    #[arg(long)]
    format: Option<String>,
    /// small, medium, large or bundled
    #[arg(long)]
    tier: Option<String>,
    /// Node budget for exact searches
    #[arg(long)]
    budget: Option<String>,
    /// Dump posterior weights after every cycle
    #[arg(long)]
    posterior: bool,
    /// Write a JSONL planner trace
    #[arg(long)]
    trace: bool,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Cli {
    fn flags(&self) -> Result<ExperimentConfig, LabError> {
        let mut cfg = ExperimentConfig::default();
        let pairs = [
            ("command", &self.command),
            ("env", &self.env),
            ("class", &self.class),
            ("states", &self.states),
            ("horizon", &self.horizon),
            ("model", &self.model),
            ("m", &self.m),
            ("n", &self.n),
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
            ("tier", &self.tier),
            ("budget", &self.budget),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.posterior {
            cfg.posterior = Some(true);
        }
        if self.trace {
            cfg.trace = Some(true);
        }
        if self.verbose > 0 {
            cfg.verbose = Some(self.verbose);
        }
        Ok(cfg)
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::Usage(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_pairs(&text)?
        }
        None => ExperimentConfig::default(),
    };
    Ok(file.overlay(cli.flags()?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(summary) => {
            for name in &summary.artifacts {
                println!("{}", summary.out.join(name).display());
            }
            println!("{}", summary.out.join("manifest.json").display());
            if summary.exit_code != 0 {
                eprintln!("aixi-lab: audit found violations");
            }
            ExitCode::from(summary.exit_code as u8)
        }
        Err(e) => {
            eprintln!("aixi-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `diffsearch`: evaluate, simulate and regenerate figure data for
//! diffusion-based search with losses, timeouts and relaunches.
//!
//! Exit codes: 0 on success, 1 on numeric failure, 2 on configuration errors.

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// `eprintln!` that ignores a closed stderr.
macro_rules! warn {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($t)*);
    }};
}

mod commands;
mod figures;
mod output;
mod settings;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffsearch::exec::Execution;
use diffsearch::sim::{Engine, SimConfig};
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Parser)]
#[command(name = "diffsearch", version, about = "Search time and energy of concurrent diffusing searchers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    /// Time step of the stepped simulator; selects it unless --engine is given.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Setting override, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Timeout rate.
    #[arg(long, global = true, conflicts_with = "timeout_mean")]
    pub r: Option<f64>,
    /// Mean timeout, `1/r`.
    #[arg(long, global = true)]
    pub timeout_mean: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub engine: Option<EngineArg>,
    /// Pair replications with negated normal increments (stepped engine).
    #[arg(long, global = true)]
    pub antithetic: bool,
    /// Run replications on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Exact,
    Stepped,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form time, energy, success probability and finiteness.
    Eval {
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Regenerate the data behind a figure.
    Figure {
        #[arg(value_enum)]
        id: figures::FigureId,
        /// Panel of fig2 (both when omitted).
        #[arg(long)]
        panel: Option<figures::Panel>,
    },
    /// Monte Carlo race samples and summary.
    Simulate,
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Numeric(_) => 1,
            Failure::Config(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Numeric(e) => e,
        }
    }
}

pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn numeric(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn numeric(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Numeric(e.into()))
    }
}

impl Common {
    /// Overrides from `--override`, `--r` and `--timeout-mean`, in that order.
    pub fn overrides(&self) -> Result<Vec<(String, Value)>, Failure> {
        let mut out = self.overrides.iter().map(|o| settings::parse_override(o)).collect::<Result<Vec<_>, _>>().config()?;
        if let Some(r) = self.r {
            out.push(("r".into(), Value::from(r)));
        }
        if let Some(t) = self.timeout_mean {
            out.push(("timeout_mean".into(), Value::from(t)));
        }
        Ok(out)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Simulation settings with `replications` as the command default.
    pub fn sim_config(&self, replications: usize, max_virtual_time: Option<f64>) -> Result<SimConfig, Failure> {
        let engine = match (self.engine, self.dt) {
            (Some(EngineArg::Exact), _) | (None, None) => Engine::Exact,
            _ => Engine::Stepped,
        };
        let config = SimConfig {
            dt: self.dt.unwrap_or(1e-2),
            replications: self.replications.unwrap_or(replications),
            seed: self.seed(),
            max_virtual_time,
            antithetic: self.antithetic,
            engine,
            execution: self.execution(),
        };
        if !(config.dt > 0.0) || config.replications == 0 || max_virtual_time.is_some_and(|t| !(t > 0.0)) {
            return Err(Failure::Config(anyhow::anyhow!("need dt > 0, replications >= 1 and max_virtual_time > 0")));
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval { json } => commands::eval(&cli.common, *json),
        Command::Figure { id, panel } => figures::run(&cli.common, *id, *panel),
        Command::Simulate => commands::simulate(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = if f.code() == 2 { "configuration error" } else { "numeric failure" };
            warn!("diffsearch: {kind}: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

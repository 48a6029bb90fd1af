//! `dyadic-tents`: runs the grid, Whitney, tent, Garnett, extension and audit stages
//! from a TOML experiment file.
//!
//! Exit status: 0 when every enabled check passes, 1 on a failed check, 2 on an
//! invalid configuration, 3 when a resource budget is exceeded, 4 when a stage is
//! missing its cached upstream artifacts.

mod config;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dyadic_tents::Error;

use config::{ExperimentConfig, FunctionSpec};
use pipeline::{Pipeline, Stage};

/// Thread count for intra-stage parallelism.
const THREADS_ENV: &str = "DYADIC_TENTS_THREADS";

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Budget(String),
    MissingCache(String),
    Audit(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Audit(_) | Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Budget(_) => 3,
            Failure::MissingCache(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid configuration: {m}"),
            Failure::Budget(m) => write!(f, "budget exceeded: {m}"),
            Failure::MissingCache(m) => write!(f, "missing upstream artifacts: {m}"),
            Failure::Audit(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::BudgetExceeded { .. } => Failure::Budget(msg),
            Error::UnsupportedInstance(_)
            | Error::InvalidParameter(_)
            | Error::DepthExceedsResolution { .. }
            | Error::NotInHierarchy(_)
            | Error::Parse(_)
            | Error::NotContained { .. }
            | Error::SupportOutsideRoot => Failure::Validation(msg),
            _ => Failure::Audit(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "dyadic-tents", version, about = "Dyadic tents, Carleson boxes and BMO extension experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cube system exactness, ball sandwich and thin-boundary fit.
    Grid(Common),
    /// Whitney decomposition of the complement.
    Whitney(Common),
    /// Region parameters and first-wins tent ownership (needs `whitney`).
    Tents(Common),
    /// Stopping-time decomposition of the boundary data.
    Garnett {
        #[command(flatten)]
        common: Common,
        /// `leaf,value` CSV replacing the configured function.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Dyadic extension and its jump measure (needs `tents` and `garnett`).
    Extend {
        #[command(flatten)]
        common: Common,
        /// Evaluate at the points of this file, one per line, instead.
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Carleson box/ball norms, sum differences and tent ADR (needs `extend`).
    CarlesonAudit(Common),
    /// Non-tangential convergence along dyadic cones (needs `extend`).
    NtAudit(Common),
    /// Walk-on-spheres probe of the harmonic extension (needs `grid`).
    Wos(Common),
    /// Every stage in order.
    All(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(Failure::Validation)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = common.depth {
        cfg.depth = Some(d);
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<(String, report::Check)>, Failure> {
    let (common, stage) = match &cli.command {
        Command::Grid(c) => (c, Some(Stage::Grid)),
        Command::Whitney(c) => (c, Some(Stage::Whitney)),
        Command::Tents(c) => (c, Some(Stage::Tents)),
        Command::Garnett { common, .. } => (common, Some(Stage::Garnett)),
        Command::Extend { common, .. } => (common, Some(Stage::Extend)),
        Command::CarlesonAudit(c) => (c, Some(Stage::Carleson)),
        Command::NtAudit(c) => (c, Some(Stage::Nt)),
        Command::Wos(c) => (c, Some(Stage::Wos)),
        Command::All(c) => (c, None),
    };
    let mut cfg = load(common)?;
    if let Command::Garnett { data: Some(path), .. } = &cli.command {
        cfg.function = FunctionSpec::Csv { path: path.clone() };
    }
    let mut p = Pipeline::new(cfg)?;
    match (&cli.command, stage) {
        (Command::Extend { query: Some(q), .. }, _) => p.extend(Some(q))?,
        (_, Some(s)) => p.run(s)?,
        (_, None) => p.run_all()?,
    }
    Ok(p.checks)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(checks) => {
            let mut failed = 0;
            for (stage, c) in &checks {
                let verdict = if c.pass { "pass" } else { "FAIL" };
                eprintln!("{verdict} {stage}/{}: {} (limit {})", c.name, c.value, c.limit);
                failed += !c.pass as usize;
            }
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

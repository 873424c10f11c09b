//! Command-line front end: configuration files, price and weight CSVs,
//! and the `simulate`, `backtest`, `logopt`, `compare` and `check`
//! subcommands.
//!
//! Every JSON output embeds the full configuration, seed included, so a run
//! can be repeated from its own report.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::CliError;

use clap::{Args, Parser, Subcommand};
use commands::Envelope;
use config::{load_config, BacktestConfig, LogoptConfig, SimulateConfig};
use growthlab_core::asymptotics::{CheckConfig, CompareConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "growthlab", version, about = "Growth-optimal, universal and best-in-hindsight portfolios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set setting.steps=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    fn load<T>(&self) -> Result<T, CliError>
    where
        T: serde::de::DeserializeOwned + Serialize + Default,
    {
        let mut o = self.overrides.clone();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        load_config(self.config.as_deref(), &o)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a market path and write its weights as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Weights CSV `t,w1,…,wd`.
        #[arg(long)]
        out: PathBuf,
        /// JSON summary; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Best constant and Lipschitz maps in hindsight against their universal mixtures on a price file.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Prices CSV `date,<names>`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the log-optimal portfolio of the model's Euler chain.
    Logopt {
        #[command(flatten)]
        common: Common,
        /// Table CSV `x1..xd,p1..pd,L`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Compare retrospective, universal and log-optimal growth rates.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Running growth rates `portfolio,T,rate`.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Keep the mixture's per-atom final log wealth in the report.
        #[arg(long)]
        emit_atoms: bool,
    },
    /// Run the check battery; exits 1 when any check fails.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = json_bytes(value)?;
    match out {
        Some(p) => io::atomic_write(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Sizes the global thread pool from `GROWTHLAB_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GROWTHLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GROWTHLAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { common, out, summary } => {
            let cfg: SimulateConfig = common.load()?;
            let (path, report) = commands::simulate(&cfg)?;
            io::atomic_write(&out, &io::weights_csv(&path))?;
            emit(&Envelope::new("simulate", cfg, report), summary.as_deref())?;
        }
        Command::Backtest { common, input, out } => {
            let cfg: BacktestConfig = common.load()?;
            let (series, path) = io::ingest_prices(&input)?;
            let report = commands::backtest(&cfg, &series.names, &path)?;
            emit(&Envelope::new("backtest", cfg, report), out.as_deref())?;
        }
        Command::Logopt { common, out, summary } => {
            let cfg: LogoptConfig = common.load()?;
            let (table, report) = commands::logopt(&cfg)?;
            io::atomic_write(&out, &io::table_csv(&table))?;
            emit(&Envelope::new("logopt", cfg, report), summary.as_deref())?;
        }
        Command::Compare {
            common,
            out,
            plot,
            emit_atoms,
        } => {
            let cfg: CompareConfig = common.load()?;
            let report = commands::compare(&cfg, emit_atoms)?;
            if let Some(p) = plot {
                let r = &report.rates;
                let csv = io::partials_csv(&[("retro", &r.retro), ("universal", &r.universal), ("logopt", &r.logopt)]);
                io::atomic_write(&p, &csv)?;
            }
            emit(&Envelope::new("compare", cfg, report), out.as_deref())?;
        }
        Command::Check { common, out } => {
            let cfg: CheckConfig = common.load()?;
            let report = commands::check(&cfg)?;
            let pass = report.pass;
            emit(&Envelope::new("check", cfg, report), out.as_deref())?;
            return Ok(if pass { 0 } else { 1 });
        }
    }
    Ok(0)
}

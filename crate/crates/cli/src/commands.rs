//! The subcommands as library functions returning their reports.

use crate::config::{BacktestConfig, LogoptConfig, SimulateConfig};
use crate::error::CliError;
use growthlab_core::asymptotics::{
    check_cover_gap, compare_three, run_checks, CheckConfig, CheckRecord, CheckReport, CompareConfig,
    GrowthRateReport, Setting,
};
use growthlab_core::markets::{
    simulate_diffusion_with_stats, simulate_discrete, BoundaryStats, Diffusion, DiffusionModel, EulerKernel,
};
use growthlab_core::optimize::{best_constant, best_lipschitz, log_optimal_map, LogOptimalTable, RetroResult};
use growthlab_core::portfolios::{sample_mixture, MixtureClass, PortfolioMapSpec};
use growthlab_core::rng::derive_seed;
use growthlab_core::simplex::{MarketPath, SimplexPoint};
use growthlab_core::wealth::{wealth_universal, WealthMode};
use serde::{Deserialize, Serialize};

/// A report together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub command: String,
    pub config: C,
    pub report: R,
}

impl<C, R> Envelope<C, R> {
    pub fn new(command: &str, config: C, report: R) -> Self {
        Self {
            command: command.to_string(),
            config,
            report,
        }
    }
}

fn start_point(model: &DiffusionModel, start: &Option<Vec<f64>>) -> Result<SimplexPoint, CliError> {
    let p = match (start, model) {
        (Some(s), _) => SimplexPoint::new(s)?,
        (None, DiffusionModel::WrightFisher(wf)) => SimplexPoint::new(&wf.theta)?,
        (None, DiffusionModel::Static { d }) => SimplexPoint::new(&vec![1.0 / *d as f64; *d])?,
    };
    if p.dim() != model.dim() {
        return Err(CliError::Config("start state has the wrong dimension".into()));
    }
    Ok(p)
}

/// Size of a simulated path; boundary counts are kept for sampled diffusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub rows: usize,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryStats>,
}

pub fn simulate(cfg: &SimulateConfig) -> Result<(MarketPath, SimulateReport), CliError> {
    cfg.model.validate()?;
    let start = start_point(&cfg.model, &cfg.start)?;
    let (path, boundary) = match cfg.setting {
        Setting::Discrete { dt, steps } => {
            let kernel = EulerKernel::new(cfg.model.clone(), dt, cfg.boundary)?;
            (simulate_discrete(&kernel, steps, &start, cfg.seed)?, None)
        }
        Setting::Continuous { dt, horizon } => {
            let (p, s) = simulate_diffusion_with_stats(&cfg.model, horizon, dt, &start, cfg.seed, cfg.boundary)?;
            (p, Some(s))
        }
    };
    let report = SimulateReport {
        rows: path.len(),
        horizon: path.horizon(),
        boundary,
    };
    Ok((path, report))
}

/// Summary of a log-optimal table; the table itself goes to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoptSummary {
    pub states: usize,
    /// Average optimal one-step growth over the table states.
    pub mean_value: f64,
    pub max_value: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
}

pub fn logopt(cfg: &LogoptConfig) -> Result<(LogOptimalTable, LogoptSummary), CliError> {
    let kernel = EulerKernel::new(cfg.model.clone(), cfg.dt, cfg.boundary)?;
    let table = log_optimal_map(&kernel, cfg.resolution, cfg.samples, cfg.margin, cfg.seed)?;
    let n = table.values.len();
    let summary = LogoptSummary {
        states: n,
        mean_value: table.values.iter().sum::<f64>() / n as f64,
        max_value: table.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_iterations: table.max_iterations,
        max_residual: table.max_residual,
    };
    Ok((table, summary))
}

/// Best map in hindsight against the mixture over one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class: MixtureClass,
    pub retro_log_wealth: f64,
    pub universal_log_wealth: f64,
    /// Both log wealths divided by the number of steps.
    pub retro_rate: f64,
    pub universal_rate: f64,
    pub gap: f64,
    /// Weights of the best constant map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retro_weights: Option<Vec<f64>>,
    /// Absent when no mixture atom lies within the covering radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_check: Option<CheckRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub version: u32,
    pub assets: Vec<String>,
    pub rows: usize,
    pub classes: Vec<ClassResult>,
}

fn class_result(
    path: &MarketPath,
    class: MixtureClass,
    retro: RetroResult,
    cfg: &BacktestConfig,
    tag: u64,
) -> Result<ClassResult, CliError> {
    let mix = sample_mixture(&class, path.dim(), cfg.atoms, derive_seed(cfg.seed, tag))?;
    let universal = wealth_universal(path, &mix, WealthMode::Discrete)?.final_log();
    let t = path.horizon();
    let cover_check = match check_cover_gap(path, &mix, &retro, cfg.cover_radius) {
        Ok(rec) => Some(rec),
        Err(growthlab_core::Error::NoAtomInBall) => None,
        Err(e) => return Err(e.into()),
    };
    let retro_weights = match &retro.map {
        PortfolioMapSpec::Constant(c) => Some(c.weights.clone()),
        _ => None,
    };
    Ok(ClassResult {
        class,
        retro_log_wealth: retro.log_wealth,
        universal_log_wealth: universal,
        retro_rate: retro.log_wealth / t,
        universal_rate: universal / t,
        gap: (retro.log_wealth - universal) / t,
        retro_weights,
        cover_check,
    })
}

pub fn backtest(cfg: &BacktestConfig, names: &[String], path: &MarketPath) -> Result<BacktestReport, CliError> {
    let constant = class_result(path, MixtureClass::Constant, best_constant(path)?, cfg, 1)?;
    let lipschitz = class_result(
        path,
        MixtureClass::Lipschitz {
            m: cfg.m,
            resolution: cfg.resolution,
            margin: None,
        },
        best_lipschitz(path, cfg.m, cfg.resolution)?,
        cfg,
        2,
    )?;
    Ok(BacktestReport {
        version: 1,
        assets: names.to_vec(),
        rows: path.len(),
        classes: vec![constant, lipschitz],
    })
}

/// Comparison report; mixture atoms are kept only when asked for.
pub fn compare(cfg: &CompareConfig, emit_atoms: bool) -> Result<GrowthRateReport, CliError> {
    let mut report = compare_three(cfg)?;
    if !emit_atoms {
        report.atoms = None;
    }
    Ok(report)
}

pub fn check(cfg: &CheckConfig) -> Result<CheckReport, CliError> {
    Ok(run_checks(cfg)?)
}

use super::checks::{check_cover_gap, check_leq1, check_martingale_clt_premise, check_supermartingale, CheckRecord};
use super::compare::numeraire_generator;
use super::rates::{l_num_quadrature, l_pi_diffusion};
use crate::error::{invalid, Result};
use crate::markets::{
    invariant_sample_diffusion, simulate_diffusion, simulate_discrete, BoundaryRule, CycleKernel, Diffusion,
    DiffusionModel, EulerKernel, WrightFisherSpec,
};
use crate::optimize::{best_constant, log_optimal_map, DEFAULT_MARGIN};
use crate::portfolios::{sample_mixture, GeneratorFunction, MixtureClass, PortfolioMapSpec};
use crate::prelude::*;
use alloc::format;
use crate::rng::{derive_seed, stream};
use crate::simplex::{quadratic_variation, RefiningPartition, SimplexPoint};
use crate::wealth::{wealth_diffusion_exponential, wealth_discrete, wealth_master_equation};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Settings of the check battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub seed: u64,
    pub model: DiffusionModel,
    /// Step of the Euler chain behind the kernel checks.
    pub dt: f64,
    pub boundary: BoundaryRule,
    pub start: Option<Vec<f64>>,
    /// Horizons of the cover-gap trend on the alternating path.
    pub cover_horizons: Vec<usize>,
    pub cover_atoms: usize,
    pub cover_radius: f64,
    pub n_paths: usize,
    /// Chain steps before the one-step supermartingale ratio is recorded.
    pub warmup_steps: usize,
    pub mixture_atoms: usize,
    pub logopt_resolution: usize,
    pub logopt_samples: usize,
    pub margin: f64,
    pub leq1_states: usize,
    pub leq1_samples: usize,
    pub leq1_weights: usize,
    pub neutrality_paths: usize,
    pub neutrality_horizon: f64,
    pub clt_horizon: f64,
    pub clt_dt: f64,
    pub invariant_samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: DiffusionModel::WrightFisher(WrightFisherSpec::benchmark()),
            dt: 0.05,
            boundary: BoundaryRule::default(),
            start: None,
            cover_horizons: vec![100, 1000, 10_000],
            cover_atoms: 1000,
            cover_radius: 0.05,
            n_paths: 100_000,
            warmup_steps: 10,
            mixture_atoms: 32,
            logopt_resolution: 32,
            logopt_samples: 10_000,
            margin: DEFAULT_MARGIN,
            leq1_states: 20,
            leq1_samples: 10_000,
            leq1_weights: 100,
            neutrality_paths: 100,
            neutrality_horizon: 10.0,
            clt_horizon: 32768.0,
            clt_dt: 1e-3,
            invariant_samples: 10_000,
            burn_in: 1000,
            thinning: 100,
        }
    }
}

/// Outcome of [`run_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub version: u32,
    pub seed: u64,
    pub model: DiffusionModel,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
}

mod tag {
    pub const COVER: u64 = 11;
    pub const KERNEL: u64 = 12;
    pub const LEQ1: u64 = 13;
    pub const NEUTRAL: u64 = 14;
    pub const CLT: u64 = 15;
    pub const INVARIANT: u64 = 16;
}

fn centre(model: &DiffusionModel) -> Vec<f64> {
    match model {
        DiffusionModel::WrightFisher(wf) => wf.theta.clone(),
        DiffusionModel::Static { d } => vec![1.0 / *d as f64; *d],
    }
}

/// Gap between best constant and the uniform-constant mixture on the
/// half/double path at each horizon, plus the trend across horizons.
fn cover_checks(cfg: &CheckConfig) -> Result<Vec<CheckRecord>> {
    let kernel = CycleKernel::half_double();
    let start = SimplexPoint::new(&[0.5, 0.5])?;
    let longest = cfg.cover_horizons.iter().copied().max().ok_or(invalid("need cover horizons"))?;
    let path = simulate_discrete(&kernel, longest, &start, 0)?;
    let mix = sample_mixture(&MixtureClass::Constant, 2, cfg.cover_atoms, derive_seed(cfg.seed, tag::COVER))?;
    let mut out = Vec::new();
    let mut series = Vec::new();
    for &t in &cfg.cover_horizons {
        let prefix = path.prefix(t + 1);
        let retro = best_constant(&prefix)?;
        let mut rec = check_cover_gap(&prefix, &mix, &retro, cfg.cover_radius)?;
        series.push((t as f64, rec.statistic));
        rec.name = format!("cover_gap_T{t}");
        out.push(rec);
    }
    let rise = series
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut trend = CheckRecord::at_most("cover_gap_trend", if series.len() < 2 { 0.0 } else { rise }, 0.0);
    trend.series = series;
    out.push(trend);
    Ok(out)
}

fn random_states(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, 0);
    (0..n)
        .map(|_| {
            let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = e.iter().sum();
            let floor = 0.02;
            e.iter().map(|v| floor + (1.0 - floor * d as f64) * v / s).collect()
        })
        .collect()
}

fn kernel_checks(cfg: &CheckConfig, start: &SimplexPoint) -> Result<Vec<CheckRecord>> {
    let d = start.dim();
    let kernel = EulerKernel::new(cfg.model.clone(), cfg.dt, cfg.boundary)?;
    let seed = derive_seed(cfg.seed, tag::KERNEL);
    let table = log_optimal_map(&kernel, cfg.logopt_resolution, cfg.logopt_samples, cfg.margin, seed)?;
    let reference = table.to_map()?;
    let mix = sample_mixture(&MixtureClass::Constant, d, cfg.mixture_atoms, derive_seed(seed, 1))?;
    let sm = check_supermartingale(&kernel, &mix, &reference, start, cfg.warmup_steps, cfg.n_paths, derive_seed(seed, 2))?;
    let states = random_states(d, cfg.leq1_states, derive_seed(cfg.seed, tag::LEQ1));
    let leq1 = check_leq1(&kernel, &states, cfg.leq1_samples, cfg.leq1_weights, derive_seed(cfg.seed, tag::LEQ1))?;
    Ok(vec![sm, leq1])
}

/// Market map in the discrete, master-equation and exponential engines.
fn neutrality_check(cfg: &CheckConfig, start: &SimplexPoint) -> Result<CheckRecord> {
    let seed = derive_seed(cfg.seed, tag::NEUTRAL);
    let dt = cfg.clt_dt;
    let worst = crate::par::try_map_indexed(cfg.neutrality_paths, |i| {
        let raw = simulate_diffusion(&cfg.model, cfg.neutrality_horizon, dt, start, derive_seed(seed, i as u64))?;
        let path = quadratic_variation(&raw, &RefiningPartition::new(dt, 0)?)?;
        let market = PortfolioMapSpec::market();
        let a = wealth_discrete(&path, &market)?.final_log();
        let b = wealth_master_equation(&path, &GeneratorFunction::constant())?.final_log();
        let c = wealth_diffusion_exponential(&path, &market, Some(&cfg.model))?.final_log();
        Ok::<_, crate::Error>(a.abs().max(b.abs()).max(c.abs()))
    })?;
    Ok(CheckRecord::at_most(
        "numeraire_neutrality",
        worst.into_iter().fold(0.0, f64::max),
        1e-9,
    ))
}

fn diffusion_checks(cfg: &CheckConfig, start: &SimplexPoint) -> Result<Vec<CheckRecord>> {
    let g_num = numeraire_generator(&cfg.model, 10.0);
    let num_map = PortfolioMapSpec::Fg(g_num);
    let inv = invariant_sample_diffusion(
        &cfg.model,
        cfg.clt_dt,
        start,
        cfg.invariant_samples,
        cfg.burn_in,
        cfg.thinning,
        derive_seed(cfg.seed, tag::INVARIANT),
    )?;
    let l_num = l_num_quadrature(&cfg.model, &inv)?;
    let l_pi = l_pi_diffusion(&num_map, &cfg.model, &inv)?;
    let identity = CheckRecord::at_most("l_num_identity", (l_num.value - l_pi.l.value).abs(), 1e-10);
    let clt = check_martingale_clt_premise(
        &cfg.model,
        &num_map,
        cfg.clt_horizon,
        cfg.clt_dt,
        start,
        derive_seed(cfg.seed, tag::CLT),
    )?;
    Ok(vec![identity, clt])
}

/// Runs the theorem-check battery: covering gaps on the half/double path,
/// the supermartingale and per-state ratio checks on the model's Euler
/// chain, numéraire neutrality of all wealth engines, the quadrature
/// identity for the log-optimal rate, and the bracket growth premise.
pub fn run_checks(cfg: &CheckConfig) -> Result<CheckReport> {
    cfg.model.validate()?;
    let start = match &cfg.start {
        Some(s) => SimplexPoint::new(s)?,
        None => SimplexPoint::new(&centre(&cfg.model))?,
    };
    if start.dim() != cfg.model.dim() {
        return Err(invalid("start state has the wrong dimension"));
    }
    let mut checks = cover_checks(cfg)?;
    checks.extend(kernel_checks(cfg, &start)?);
    checks.push(neutrality_check(cfg, &start)?);
    checks.extend(diffusion_checks(cfg, &start)?);
    Ok(CheckReport {
        version: 1,
        seed: cfg.seed,
        model: cfg.model.clone(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_market_battery_passes() {
        let cfg = CheckConfig {
            model: DiffusionModel::Static { d: 2 },
            cover_horizons: vec![10, 100],
            cover_atoms: 100,
            n_paths: 200,
            logopt_resolution: 4,
            logopt_samples: 10,
            leq1_states: 3,
            leq1_samples: 50,
            leq1_weights: 5,
            neutrality_paths: 3,
            neutrality_horizon: 1.0,
            clt_horizon: 8.0,
            clt_dt: 1e-2,
            invariant_samples: 100,
            burn_in: 10,
            thinning: 1,
            ..CheckConfig::default()
        };
        let r = run_checks(&cfg).unwrap();
        assert!(r.pass, "{:#?}", r.checks);
    }
}

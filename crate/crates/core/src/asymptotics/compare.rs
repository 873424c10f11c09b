use super::checks::CheckRecord;
use super::rates::{growth_time_average, l_num_quadrature, paired_gap, time_average_estimate};
use crate::error::{invalid, Result};
use crate::markets::{
    invariant_sample_diffusion, invariant_sample_kernel, simulate_diffusion_with_stats, simulate_discrete,
    BoundaryRule, Diffusion, DiffusionModel, EulerKernel, InvariantSample, MarkovKernel,
};
use crate::optimize::{
    best_constant, best_generator_with, best_lipschitz_with, log_optimal_from_samples, log_optimal_map, LipschitzSearch, DEFAULT_MARGIN,
};
use crate::portfolios::{
    project_into_class, sample_mixture, Family, GeneratorFunction, LipschitzGridMap, MixtureClass, PortfolioMapSpec,
};
use crate::prelude::*;
use crate::rng::derive_seed;
use crate::simplex::{quadratic_variation, MarketPath, RefiningPartition, SimplexLattice, SimplexPoint};
use crate::stats::{batch_estimate, log_sum_exp, Estimate};
use crate::wealth::{wealth_discrete, wealth_master_equation, wealth_universal_detailed, WealthCurve, WealthMode};
use serde::{Deserialize, Serialize};

/// Time structure of a comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "time", rename_all = "snake_case")]
pub enum Setting {
    /// Euler chain of the model with step `dt`, run for `steps` steps;
    /// rates are per step.
    Discrete { dt: f64, steps: usize },
    /// Sampled diffusion with mesh `dt` up to `horizon`; rates are per unit time.
    Continuous { dt: f64, horizon: f64 },
}

/// Everything a comparison run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub seed: u64,
    pub model: DiffusionModel,
    pub setting: Setting,
    /// Starting state; defaults to the model's centre.
    pub start: Option<Vec<f64>>,
    pub boundary: BoundaryRule,
    /// Class bound `M` of the searched and mixed classes.
    #[serde(rename = "M")]
    pub m: f64,
    /// Further bounds for the retrospective ladder.
    #[serde(rename = "M_ladder")]
    pub m_ladder: Vec<f64>,
    /// Lattice resolution `K` of the Lipschitz class (mesh `1/K`).
    pub resolution: usize,
    /// Generator family of the continuous-time class.
    pub family: Family,
    pub atoms: usize,
    /// Atom-count prefixes reported for the mixture.
    pub atom_ladder: Vec<usize>,
    /// Kernel draws per state of the log-optimal table.
    pub logopt_samples: usize,
    pub logopt_resolution: usize,
    pub margin: f64,
    pub invariant_samples: usize,
    /// Kernel draws per invariant sample for the per-state optimum.
    pub inner_samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Absolute tolerance of the three-way rate equality.
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: DiffusionModel::WrightFisher(crate::markets::WrightFisherSpec::benchmark()),
            setting: Setting::Discrete {
                dt: 0.05,
                steps: 100_000,
            },
            start: None,
            boundary: BoundaryRule::default(),
            m: 5.0,
            m_ladder: vec![1.0, 2.0, 4.0, 8.0],
            resolution: 32,
            family: Family::PowerProduct,
            atoms: 1000,
            atom_ladder: vec![10, 100, 1000],
            logopt_samples: 10_000,
            logopt_resolution: 32,
            margin: DEFAULT_MARGIN,
            invariant_samples: 10_000,
            inner_samples: 1000,
            burn_in: 1000,
            thinning: 5,
            tolerance: 0.02,
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let ok = match self.setting {
            Setting::Discrete { dt, steps } => dt > 0.0 && steps >= 1,
            Setting::Continuous { dt, horizon } => dt > 0.0 && horizon >= dt,
        };
        if !ok || !(self.m > 0.0) || self.resolution == 0 || self.atoms == 0 {
            return Err(invalid("comparison settings out of range"));
        }
        if let Some(s) = &self.start {
            if s.len() != self.model.dim() {
                return Err(invalid("start state has the wrong dimension"));
            }
        }
        Ok(())
    }

    pub fn start_point(&self) -> Result<SimplexPoint> {
        match &self.start {
            Some(s) => SimplexPoint::new(s),
            None => SimplexPoint::new(&model_centre(&self.model)),
        }
    }
}

fn model_centre(model: &DiffusionModel) -> Vec<f64> {
    match model {
        DiffusionModel::WrightFisher(wf) => wf.theta.clone(),
        DiffusionModel::Static { d } => vec![1.0 / *d as f64; *d],
    }
}

/// The generator of the continuous-time log-optimal portfolio, when the
/// model has one: `Π x_i^{κθ_i/σ²}` for Wright–Fisher, `G ≡ 1` without drift.
pub fn numeraire_generator(model: &DiffusionModel, m: f64) -> GeneratorFunction {
    match model {
        DiffusionModel::WrightFisher(wf) => {
            let e: Vec<f64> = wf.theta.iter().map(|t| wf.kappa * t / wf.sigma2).collect();
            GeneratorFunction::power_product(&e, m)
        }
        DiffusionModel::Static { .. } => GeneratorFunction::constant(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub parameter: f64,
    pub value: f64,
}

/// One rate with its standard error, optional ladder and running averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub value: f64,
    pub se: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<LadderPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partials: Vec<(f64, f64)>,
}

impl RateRecord {
    fn of(curve: &WealthCurve) -> Self {
        let e = time_average_estimate(curve);
        Self {
            value: e.value,
            se: e.se,
            ladder: Vec::new(),
            partials: growth_time_average(curve).1,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadratureRecord {
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "L_se")]
    pub l_se: Option<f64>,
    #[serde(rename = "L_num")]
    pub l_num: Option<f64>,
    #[serde(rename = "L_num_se")]
    pub l_num_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub retro: RateRecord,
    pub universal: RateRecord,
    pub logopt: RateRecord,
    pub quadrature: QuadratureRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub name: String,
    pub value: f64,
    pub se: f64,
}

/// Result of [`compare_three`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRateReport {
    pub version: u32,
    pub seed: u64,
    pub model: DiffusionModel,
    pub setting: Setting,
    #[serde(rename = "T")]
    pub t: f64,
    pub rates: Rates,
    pub gaps: Vec<GapRecord>,
    pub checks: Vec<CheckRecord>,
    /// Final log-wealth of every mixture atom, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<f64>>,
}

impl GrowthRateReport {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Stream tags derived from the run seed.
mod tag {
    pub const PATH: u64 = 1;
    pub const ATOMS: u64 = 2;
    pub const LOGOPT: u64 = 3;
    pub const INVARIANT: u64 = 4;
    pub const SEARCH: u64 = 5;
    pub const INNER: u64 = 6;
}

fn atom_ladder(finals: &[f64], counts: &[usize], horizon: f64) -> Vec<LadderPoint> {
    counts
        .iter()
        .filter(|&&n| n >= 1 && n <= finals.len())
        .map(|&n| LadderPoint {
            parameter: n as f64,
            value: (log_sum_exp(&finals[..n]) - (n as f64).ln()) / horizon,
        })
        .collect()
}

struct Legs {
    retro: (RateRecord, WealthCurve),
    universal: (RateRecord, WealthCurve),
    logopt: (RateRecord, WealthCurve),
    quadrature: QuadratureRecord,
    horizon: f64,
    /// Wealth of the log-optimal map moved into the searched class.
    in_class_logopt: f64,
    retro_log: f64,
    atom_finals: Vec<f64>,
    atom_log_weights: Vec<f64>,
}

fn discrete_legs(cfg: &CompareConfig, dt: f64, steps: usize) -> Result<Legs> {
    let start = cfg.start_point()?;
    let d = start.dim();
    let kernel = EulerKernel::new(cfg.model.clone(), dt, cfg.boundary)?;
    let path = simulate_discrete(&kernel, steps, &start, derive_seed(cfg.seed, tag::PATH))?;
    let horizon = path.horizon();

    let table = log_optimal_map(
        &kernel,
        cfg.logopt_resolution,
        cfg.logopt_samples,
        cfg.margin,
        derive_seed(cfg.seed, tag::LOGOPT),
    )?;
    let logopt_map = table.to_map()?;
    let logopt_curve = wealth_discrete(&path, &logopt_map)?;

    let lat = SimplexLattice::new(d, cfg.resolution);
    let mut search = LipschitzSearch::new(cfg.m, cfg.resolution);
    search.seed = derive_seed(cfg.seed, tag::SEARCH);
    let warm: Vec<Vec<f64>> = (0..lat.len())
        .map(|i| logopt_map.weights(&lat.point(i)))
        .collect::<Result<_>>()?;
    let projected = project_into_class(&lat, &warm, cfg.m, search.margin(), search.sweeps);
    let in_class = PortfolioMapSpec::Lipschitz(LipschitzGridMap::new(
        d,
        cfg.resolution,
        projected.clone(),
        cfg.m,
        search.margin(),
    )?);
    let in_class_logopt = wealth_discrete(&path, &in_class)?.final_log();
    let retro = best_lipschitz_with(&path, &search, &[projected])?;
    let retro_curve = wealth_discrete(&path, &retro.map)?;
    let mut retro_rec = RateRecord::of(&retro_curve);
    retro_rec.ladder.push(LadderPoint {
        parameter: 0.0,
        value: best_constant(&path)?.log_wealth / horizon,
    });
    for &m in &cfg.m_ladder {
        let mut s = LipschitzSearch::new(m, cfg.resolution);
        s.seed = search.seed;
        let r = best_lipschitz_with(&path, &s, &[])?;
        retro_rec.ladder.push(LadderPoint {
            parameter: m,
            value: r.log_wealth / horizon,
        });
    }

    let class = MixtureClass::Lipschitz {
        m: cfg.m,
        resolution: cfg.resolution,
        margin: None,
    };
    let mixture = sample_mixture(&class, d, cfg.atoms, derive_seed(cfg.seed, tag::ATOMS))?;
    let uni = wealth_universal_detailed(&path, &mixture, WealthMode::Discrete)?;
    let mut uni_rec = RateRecord::of(&uni.curve);
    uni_rec.ladder = atom_ladder(&uni.atom_final_log, &cfg.atom_ladder, horizon);

    let inv = invariant_sample_kernel(
        &kernel,
        &start,
        cfg.invariant_samples,
        cfg.burn_in,
        cfg.thinning,
        derive_seed(cfg.seed, tag::INVARIANT),
    )?;
    let l = optimal_values(&kernel, &inv, cfg.inner_samples, cfg.margin, derive_seed(cfg.seed, tag::INNER))?;
    Ok(Legs {
        retro_log: retro.log_wealth,
        retro: (retro_rec, retro_curve),
        universal: (uni_rec, uni.curve),
        logopt: (RateRecord::of(&logopt_curve), logopt_curve),
        quadrature: QuadratureRecord {
            l: Some(l.value),
            l_se: Some(l.se),
            l_num: None,
            l_num_se: None,
        },
        horizon,
        in_class_logopt,
        atom_finals: uni.atom_final_log,
        atom_log_weights: mixture.atoms.iter().map(|a| a.weight.ln()).collect(),
    })
}

/// Mean over the invariant sample of the one-step optimal growth, each
/// state solved on its own kernel draws.
fn optimal_values<K: MarkovKernel + ?Sized>(
    kernel: &K,
    inv: &InvariantSample,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<Estimate> {
    let vals = crate::par::try_map_indexed(inv.len(), |i| {
        let x = inv.point(i);
        let samples = kernel.batch(x, n, seed, i as u64)?;
        Ok(log_optimal_from_samples(x, &samples, margin)?.value)
    })?;
    Ok(batch_estimate(&vals))
}

fn continuous_legs(cfg: &CompareConfig, dt: f64, horizon: f64) -> Result<Legs> {
    let start = cfg.start_point()?;
    let d = start.dim();
    let (raw, _) = simulate_diffusion_with_stats(
        &cfg.model,
        horizon,
        dt,
        &start,
        derive_seed(cfg.seed, tag::PATH),
        cfg.boundary,
    )?;
    let path: MarketPath = quadratic_variation(&raw, &RefiningPartition::new(dt, 0)?)?;
    let horizon = path.horizon();
    let alpha = 1.0 / cfg.m;

    let g_num = numeraire_generator(&cfg.model, cfg.m);
    let logopt_curve = wealth_master_equation(&path, &g_num)?;

    // the log-optimal generator moved into the class: shift by 1/M, exponents clamped
    let mut warm = g_num.clone();
    if warm.family == Family::PowerProduct {
        warm.params.truncate(d);
        warm.params.push(1.0 / cfg.m);
    }
    let in_class = best_generator_with(&path, cfg.m, alpha, &[cfg.family], core::slice::from_ref(&warm))?;
    let retro_curve = wealth_master_equation(
        &path,
        match &in_class.map {
            PortfolioMapSpec::Fg(g) => g,
            _ => unreachable!(),
        },
    )?;
    let warm_in_box = {
        let bounds = cfg.family.parameter_box(d, cfg.m);
        let mut p = warm.params.clone();
        if p.len() == bounds.len() {
            for (v, &(lo, hi)) in p.iter_mut().zip(&bounds) {
                *v = v.clamp(lo, hi);
            }
            let g = GeneratorFunction::new(cfg.family, p, cfg.m, alpha, d);
            match g {
                Ok(g) if crate::portfolios::certify_generator(&g, d, crate::portfolios::CERTIFY_GRID).pass => {
                    wealth_master_equation(&path, &g)?.final_log()
                }
                _ => f64::NEG_INFINITY,
            }
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut retro_rec = RateRecord::of(&retro_curve);
    for &m in &cfg.m_ladder {
        let r = best_generator_with(&path, m, 1.0 / m, &[cfg.family], &[])?;
        retro_rec.ladder.push(LadderPoint {
            parameter: m,
            value: r.log_wealth / horizon,
        });
    }

    let class = MixtureClass::Fg {
        m: cfg.m,
        alpha,
        family: cfg.family,
    };
    let mixture = sample_mixture(&class, d, cfg.atoms, derive_seed(cfg.seed, tag::ATOMS))?;
    let uni = wealth_universal_detailed(&path, &mixture, WealthMode::MasterEquation)?;
    let mut uni_rec = RateRecord::of(&uni.curve);
    uni_rec.ladder = atom_ladder(&uni.atom_final_log, &cfg.atom_ladder, horizon);

    let inv = invariant_sample_diffusion(
        &cfg.model,
        dt,
        &start,
        cfg.invariant_samples,
        cfg.burn_in,
        cfg.thinning,
        derive_seed(cfg.seed, tag::INVARIANT),
    )?;
    let l_num = l_num_quadrature(&cfg.model, &inv)?;
    Ok(Legs {
        retro_log: in_class.log_wealth,
        retro: (retro_rec, retro_curve),
        universal: (uni_rec, uni.curve),
        logopt: (RateRecord::of(&logopt_curve), logopt_curve),
        quadrature: QuadratureRecord {
            l: Some(l_num.value),
            l_se: Some(l_num.se),
            l_num: Some(l_num.value),
            l_num_se: Some(l_num.se),
        },
        horizon,
        in_class_logopt: warm_in_box,
        atom_finals: uni.atom_final_log,
        atom_log_weights: mixture.atoms.iter().map(|a| a.weight.ln()).collect(),
    })
}

/// Best-in-hindsight, universal and log-optimal growth rates on one
/// simulated path, with the quadrature value of the optimal rate, pairwise
/// gaps and the exact and statistical checks tying them together.
pub fn compare_three(cfg: &CompareConfig) -> Result<GrowthRateReport> {
    cfg.validate()?;
    let legs = match cfg.setting {
        Setting::Discrete { dt, steps } => discrete_legs(cfg, dt, steps)?,
        Setting::Continuous { dt, horizon } => continuous_legs(cfg, dt, horizon)?,
    };
    let gaps = vec![
        ("retro_minus_universal", &legs.retro.1, &legs.universal.1),
        ("retro_minus_logopt", &legs.retro.1, &legs.logopt.1),
        ("universal_minus_logopt", &legs.universal.1, &legs.logopt.1),
    ]
    .into_iter()
    .map(|(name, a, b)| {
        let e = paired_gap(a, b);
        GapRecord {
            name: name.into(),
            value: e.value,
            se: e.se,
        }
    })
    .collect::<Vec<_>>();

    let mut checks = Vec::new();
    checks.push(CheckRecord::at_most(
        "hindsight_dominance",
        legs.in_class_logopt - legs.retro_log,
        1e-10,
    ));
    let best_atom = legs
        .atom_finals
        .iter()
        .zip(&legs.atom_log_weights)
        .map(|(f, w)| f + w)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(CheckRecord::at_most(
        "universal_lower_bound",
        best_atom - legs.universal.1.final_log(),
        1e-10,
    ));
    let worst_gap = gaps.iter().map(|g| g.value.abs()).fold(0.0, f64::max);
    checks.push(CheckRecord::at_most("three_way_gap", worst_gap, cfg.tolerance));
    if let (Some(l), Some(l_se)) = (legs.quadrature.l, legs.quadrature.l_se) {
        let q = Estimate::new(l, l_se);
        for (name, rec) in [
            ("retro_vs_quadrature", &legs.retro.0),
            ("universal_vs_quadrature", &legs.universal.0),
            ("logopt_vs_quadrature", &legs.logopt.0),
        ] {
            let e = rec.estimate();
            checks.push(CheckRecord::at_most(
                name,
                (e.value - l).abs(),
                3.0 * e.combined_se(&q) + cfg.tolerance,
            ));
        }
    }
    Ok(GrowthRateReport {
        version: 1,
        seed: cfg.seed,
        model: cfg.model.clone(),
        setting: cfg.setting,
        t: legs.horizon,
        rates: Rates {
            retro: legs.retro.0,
            universal: legs.universal.0,
            logopt: legs.logopt.0,
            quadrature: legs.quadrature,
        },
        gaps,
        checks,
        atoms: Some(legs.atom_finals),
    })
}

use crate::error::{Error, Result};
use crate::linalg::{frobenius, quad_form};
use crate::markets::{Diffusion, DiffusionModel};
use crate::portfolios::{GeneratorFunction, PortfolioMapSpec};
use crate::prelude::*;
use crate::simplex::MarketPath;
use serde::{Deserialize, Serialize};

/// Log relative wealth along a path, starting from `log V_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthCurve {
    pub times: Vec<f64>,
    pub log_values: Vec<f64>,
    pub label: String,
}

impl WealthCurve {
    pub fn new(times: Vec<f64>, log_values: Vec<f64>, label: impl Into<String>) -> Self {
        Self {
            times,
            log_values,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn final_log(&self) -> f64 {
        *self.log_values.last().unwrap_or(&0.0)
    }

    /// `log V_T / T` over the whole curve.
    pub fn growth_rate(&self) -> f64 {
        let t =
            self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0);
        if t > 0.0 {
            self.final_log() / t
        } else {
            0.0
        }
    }
}

/// Running state of the pathwise integrals along a sampled path: log-wealth,
/// the accumulated drift of a generated portfolio, and the return integrals
/// `∫ dμ^i / μ^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseIntegrator {
    pub log_wealth: f64,
    pub drift: f64,
    pub returns: Vec<f64>,
}

impl PathwiseIntegrator {
    pub fn new(d: usize) -> Self {
        Self {
            log_wealth: 0.0,
            drift: 0.0,
            returns: vec![0.0; d],
        }
    }

    /// Adds the drift increment `−⟨Hess G(x), ΔQV⟩ / 2G(x)` evaluated at the
    /// left point and returns it.
    pub fn push_drift(
        &mut self,
        g: &GeneratorFunction,
        x: &[f64],
        dqv: &[f64],
        hess: &mut [f64],
    ) -> f64 {
        g.hessian(x, hess);
        let inc = -0.5 * frobenius(hess, dqv) / g.value(x);
        self.drift += inc;
        inc
    }

    /// Adds the left-point return increments `Δμ^i / μ^i`.
    pub fn push_returns(&mut self, left: &[f64], right: &[f64]) {
        for ((r, a), b) in self.returns.iter_mut().zip(left).zip(right) {
            *r += (b - a) / a;
        }
    }
}

/// Rebalancing at every path point: `V_{t+1}/V_t = Σ_j π^j(μ_t) μ^j_{t+1}/μ^j_t`.
pub fn wealth_discrete(path: &MarketPath, map: &PortfolioMapSpec) -> Result<WealthCurve> {
    let d = path.dim();
    map.validate(d)?;
    let mut w = vec![0.0; d];
    let mut logs = Vec::with_capacity(path.len());
    logs.push(0.0);
    let mut acc = 0.0;
    for t in 0..path.steps() {
        let x = path.point(t);
        let y = path.point(t + 1);
        map.weights_into(x, &mut w)?;
        acc += log_factor(&w, x, y, t)?;
        logs.push(acc);
    }
    Ok(WealthCurve::new(path.times().to_vec(), logs, map.kind()))
}

pub(crate) fn log_factor(w: &[f64], x: &[f64], y: &[f64], step: usize) -> Result<f64> {
    let f: f64 = w.iter().zip(x).zip(y).map(|((w, a), b)| w * b / a).sum();
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::NonPositiveReturn { step, value: f });
    }
    Ok(f.ln())
}

/// Wealth of the portfolio generated by `g`, computed from the generator
/// and the path's quadratic variation alone.
pub fn wealth_master_equation(path: &MarketPath, g: &GeneratorFunction) -> Result<WealthCurve> {
    wealth_master_equation_traced(path, g).map(|(c, _)| c)
}

/// As [`wealth_master_equation`], also returning the per-step drift increments.
pub fn wealth_master_equation_traced(
    path: &MarketPath,
    g: &GeneratorFunction,
) -> Result<(WealthCurve, Vec<f64>)> {
    if !path.has_qv() {
        return Err(Error::MissingQv);
    }
    let d = path.dim();
    g.check_shape(d)?;
    let log_g0 = g.value(path.point(0)).ln();
    let mut integ = PathwiseIntegrator::new(d);
    let mut hess = vec![0.0; d * d];
    let mut drift = Vec::with_capacity(path.steps());
    let mut logs = Vec::with_capacity(path.len());
    logs.push(0.0);
    for t in 0..path.steps() {
        let dqv = path.qv_increment(t).ok_or(Error::MissingQv)?;
        drift.push(integ.push_drift(g, path.point(t), &dqv, &mut hess));
        integ.log_wealth = g.value(path.point(t + 1)).ln() - log_g0 + integ.drift;
        logs.push(integ.log_wealth);
    }
    Ok((WealthCurve::new(path.times().to_vec(), logs, "fg"), drift))
}

/// Stochastic-exponential wealth `ℰ(π • R)` with the compensator taken from
/// the model covariance.
pub fn wealth_diffusion_exponential(
    path: &MarketPath,
    map: &PortfolioMapSpec,
    model: Option<&DiffusionModel>,
) -> Result<WealthCurve> {
    let model = model.ok_or(Error::MissingSpec)?;
    let d = path.dim();
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: d,
        });
    }
    map.validate(d)?;
    let mut w = vec![0.0; d];
    let mut c = vec![0.0; d * d];
    let mut logs = Vec::with_capacity(path.len());
    logs.push(0.0);
    let mut acc = 0.0;
    let times = path.times();
    for t in 0..path.steps() {
        let x = path.point(t);
        let y = path.point(t + 1);
        map.weights_into(x, &mut w)?;
        for (wi, xi) in w.iter_mut().zip(x) {
            *wi /= xi;
        }
        model.covariance(x, &mut c);
        let gain: f64 = w.iter().zip(x).zip(y).map(|((r, a), b)| r * (b - a)).sum();
        acc += gain - 0.5 * quad_form(&w, &c, &w) * (times[t + 1] - times[t]);
        logs.push(acc);
    }
    Ok(WealthCurve::new(times.to_vec(), logs, map.kind()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_diffusion, WrightFisherSpec};
    use crate::portfolios::Family;
    use crate::simplex::SimplexPoint;
    use crate::simplex::{quadratic_variation, RefiningPartition};

    fn alternating() -> MarketPath {
        MarketPath::discrete_from_rows(&[
            vec![0.5, 0.5],
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn half_half_earns_nine_eighths_per_cycle() {
        let c = wealth_discrete(
            &alternating(),
            &PortfolioMapSpec::constant(&[0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert!(c.log_values[1].abs() < 1e-15);
        assert!((c.final_log() - (9.0f64 / 8.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn market_and_pure_stock() {
        let path = simulate_diffusion(
            &WrightFisherSpec::benchmark(),
            1.0,
            1e-3,
            &SimplexPoint::new(&[0.3, 0.7]).unwrap(),
            9,
        )
        .unwrap();
        let m = wealth_discrete(&path, &PortfolioMapSpec::market()).unwrap();
        assert!(m.log_values.iter().all(|v| v.abs() < 1e-12));
        let e1 = wealth_discrete(&path, &PortfolioMapSpec::constant(&[1.0, 0.0]).unwrap()).unwrap();
        let last = path.point(path.steps());
        assert!((e1.final_log() - (last[0] / 0.3).ln()).abs() < 1e-10);
    }

    #[test]
    fn corrupt_paths_are_reported() {
        let path = MarketPath::discrete_from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let short = PortfolioMapSpec::Constant(crate::portfolios::ConstantMap {
            weights: vec![-1.0, 0.0],
        });
        let mut w = vec![0.0; 2];
        short.weights_into(path.point(0), &mut w).unwrap();
        assert!(matches!(
            log_factor(&w, path.point(0), path.point(1), 0),
            Err(Error::NonPositiveReturn { step: 0, .. })
        ));
    }

    fn sampled(seed: u64) -> MarketPath {
        let raw = simulate_diffusion(
            &WrightFisherSpec::benchmark(),
            1.0,
            1e-3,
            &SimplexPoint::new(&[0.4, 0.6]).unwrap(),
            seed,
        )
        .unwrap();
        quadratic_variation(&raw, &RefiningPartition::new(1e-3, 0).unwrap()).unwrap()
    }

    #[test]
    fn master_equation_needs_qv() {
        let raw = simulate_diffusion(
            &WrightFisherSpec::benchmark(),
            0.1,
            1e-3,
            &SimplexPoint::new(&[0.4, 0.6]).unwrap(),
            1,
        )
        .unwrap();
        assert!(matches!(
            wealth_master_equation(&raw, &GeneratorFunction::constant()),
            Err(Error::MissingQv)
        ));
        assert!(matches!(
            wealth_diffusion_exponential(&raw, &PortfolioMapSpec::market(), None),
            Err(Error::MissingSpec)
        ));
    }

    #[test]
    fn constant_generator_is_the_market() {
        let c = wealth_master_equation(&sampled(2), &GeneratorFunction::constant()).unwrap();
        assert!(c.log_values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn quadratic_generator_drift_is_the_trace() {
        // G(x) = 2 − ½‖x‖² with Hessian −I
        let g = GeneratorFunction::new(Family::Quadratic, vec![2.0, 1.0], 10.0, 0.1, 2).unwrap();
        let path = sampled(3);
        let (c, drift) = wealth_master_equation_traced(&path, &g).unwrap();
        let gv = |x: &[f64]| 2.0 - 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let mut acc = 0.0;
        for t in 0..path.steps() {
            let dq = path.qv_increment(t).unwrap();
            let inc = (dq[0] + dq[3]) / (2.0 * gv(path.point(t)));
            assert!((drift[t] - inc).abs() < 1e-15);
            assert!(drift[t] >= 0.0);
            acc += inc;
        }
        let expect = gv(path.point(path.steps())).ln() - gv(path.point(0)).ln() + acc;
        assert!((c.final_log() - expect).abs() < 1e-12);
    }

    #[test]
    fn market_is_neutral_under_the_exponential() {
        let path = sampled(4);
        let model = DiffusionModel::WrightFisher(WrightFisherSpec::benchmark());
        let c =
            wealth_diffusion_exponential(&path, &PortfolioMapSpec::market(), Some(&model)).unwrap();
        assert!(c.final_log().abs() < 1e-12);
    }

    #[test]
    fn integrator_tracks_returns() {
        let mut it = PathwiseIntegrator::new(2);
        it.push_returns(&[0.5, 0.5], &[0.6, 0.4]);
        assert!((it.returns[0] - 0.2).abs() < 1e-15 && (it.returns[1] + 0.2).abs() < 1e-15);
    }
}

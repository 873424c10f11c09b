use crate::error::{invalid, Error, Result};
use crate::markets::{Diffusion, InvariantSample, MarkovKernel};
use crate::portfolios::PortfolioMapSpec;
use crate::prelude::*;
use crate::stats::{batch_estimate, Estimate};
use crate::wealth::WealthCurve;
use serde::{Deserialize, Serialize};

/// `(1/T) log V_T` and the running averages at dyadic checkpoints
/// `t_1, t_2, t_4, …` and at the last point.
pub fn growth_time_average(curve: &WealthCurve) -> (f64, Vec<(f64, f64)>) {
    let n = curve.len();
    if n < 2 {
        return (0.0, Vec::new());
    }
    let t0 = curve.times[0];
    let avg = |i: usize| curve.log_values[i] / (curve.times[i] - t0);
    let mut partials = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        partials.push((curve.times[i] - t0, avg(i)));
        i *= 2;
    }
    partials.push((curve.times[n - 1] - t0, avg(n - 1)));
    (avg(n - 1), partials)
}

/// Per-unit-time log increments of a curve.
pub fn rate_increments(curve: &WealthCurve) -> Vec<f64> {
    curve
        .log_values
        .windows(2)
        .zip(curve.times.windows(2))
        .map(|(l, t)| (l[1] - l[0]) / (t[1] - t[0]))
        .collect()
}

/// Time-average growth rate with a batch-means standard error over the
/// per-step increments (equal spacing makes the mean equal `log V_T / T`).
pub fn time_average_estimate(curve: &WealthCurve) -> Estimate {
    let inc = rate_increments(curve);
    let se = batch_estimate(&inc).se;
    Estimate::new(growth_time_average(curve).0, se)
}

/// Rate of `a` minus rate of `b` on the same path, with a batch-means SE of
/// the paired increments.
pub fn paired_gap(a: &WealthCurve, b: &WealthCurve) -> Estimate {
    let inc: Vec<f64> = rate_increments(a)
        .iter()
        .zip(rate_increments(b))
        .map(|(x, y)| x - y)
        .collect();
    Estimate::new(
        growth_time_average(a).0 - growth_time_average(b).0,
        batch_estimate(&inc).se,
    )
}

/// One-step expected log-growth `L^π = ∫∫ log⟨π(x), y/x⟩ ρ(x,dy) ρ(dx)` by
/// nested Monte Carlo: `n_inner` kernel draws at every invariant sample
/// point (point `i` on stream `(seed, i)`), batch means over the outer
/// average.
pub fn l_pi_discrete<K: MarkovKernel + ?Sized>(
    map: &PortfolioMapSpec,
    kernel: &K,
    inv: &InvariantSample,
    n_inner: usize,
    seed: u64,
) -> Result<Estimate> {
    if inv.is_empty() || n_inner == 0 {
        return Err(invalid("need invariant samples and inner draws"));
    }
    let d = inv.dim();
    map.validate(d)?;
    let inner = crate::par::try_map_indexed(inv.len(), |i| {
        let x = inv.point(i);
        let w = map.weights(x)?;
        let ys = kernel.batch(x, n_inner, seed, i as u64)?;
        let s: f64 = ys
            .chunks_exact(d)
            .map(|y| w.iter().zip(y).zip(x).map(|((w, y), x)| w * y / x).sum::<f64>().ln())
            .sum();
        Ok::<_, Error>(s / n_inner as f64)
    })?;
    Ok(batch_estimate(&inner))
}

/// Growth rate and quadratic-form integral of a map in a diffusion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRates {
    #[serde(rename = "L")]
    pub l: Estimate,
    #[serde(rename = "Q")]
    pub q: Estimate,
}

/// `L^π = ∫ (π/x)ᵀcλ dρ − ½ ∫ (π/x)ᵀc(π/x) dρ` and `Q^π`, the second integral.
pub fn l_pi_diffusion<D: Diffusion + ?Sized>(
    map: &PortfolioMapSpec,
    model: &D,
    inv: &InvariantSample,
) -> Result<DiffusionRates> {
    if inv.is_empty() {
        return Err(invalid("need invariant samples"));
    }
    let d = inv.dim();
    map.validate(d)?;
    let terms = crate::par::try_map_indexed(inv.len(), |i| {
        let x = inv.point(i);
        let mut w = map.weights(x)?;
        for (wi, xi) in w.iter_mut().zip(x) {
            *wi /= xi;
        }
        let mut c = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        model.covariance(x, &mut c);
        model.drift(x, &mut b);
        let gain: f64 = w.iter().zip(&b).map(|(a, b)| a * b).sum();
        let q = crate::linalg::quad_form(&w, &c, &w);
        if !gain.is_finite() || !q.is_finite() {
            return Err(Error::NonFiniteIntegrand { index: i });
        }
        Ok((gain - 0.5 * q, q))
    })?;
    let l: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let q: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok(DiffusionRates {
        l: batch_estimate(&l),
        q: batch_estimate(&q),
    })
}

/// `L^num = ½ ∫ λᵀcλ dρ`.
pub fn l_num_quadrature<D: Diffusion + ?Sized>(model: &D, inv: &InvariantSample) -> Result<Estimate> {
    if inv.is_empty() {
        return Err(invalid("need invariant samples"));
    }
    let d = inv.dim();
    let vals = crate::par::try_map_indexed(inv.len(), |i| {
        let x = inv.point(i);
        let mut lambda = vec![0.0; d];
        let mut b = vec![0.0; d];
        model.risk_price(x, &mut lambda);
        model.drift(x, &mut b);
        let v = 0.5 * lambda.iter().zip(&b).map(|(a, b)| a * b).sum::<f64>();
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { index: i });
        }
        Ok(v)
    })?;
    Ok(batch_estimate(&vals))
}

use crate::error::{invalid, Error, Result};
use crate::markets::{Diffusion, MarkovKernel};
use crate::portfolios::{PortfolioMapSpec, TableMap};
use crate::prelude::*;
use crate::simplex::{PortfolioWeights, SimplexPoint};
use serde::{Deserialize, Serialize};

/// Default blending margin toward uniform weights.
pub const DEFAULT_MARGIN: f64 = 1e-3;

const MAX_ITER: usize = 10_000;
const TOLERANCE: f64 = 1e-10;

/// Solution of the one-step log-optimal program at a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOptimalState {
    /// Blended optimizer `(1−ε) p̂ + ε/d`.
    pub weights: Vec<f64>,
    /// Sample objective at `weights`.
    pub value: f64,
    /// Optimizer before blending and its objective.
    pub raw_weights: Vec<f64>,
    pub raw_value: f64,
    pub iterations: usize,
    /// KKT residual at `raw_weights`.
    pub residual: f64,
}

/// `(1/n) Σ_s log⟨p, y_s / x⟩` over flat samples `y` (`n × d`).
pub fn sample_objective(x: &[f64], samples: &[f64], p: &[f64]) -> f64 {
    let d = x.len();
    let n = samples.len() / d;
    let s: f64 = samples
        .chunks_exact(d)
        .map(|y| p.iter().zip(y).zip(x).map(|((p, y), x)| p * y / x).sum::<f64>().ln())
        .sum();
    s / n as f64
}

fn objective(ratios: &[f64], d: usize, p: &[f64], grad: &mut [f64]) -> f64 {
    let n = (ratios.len() / d) as f64;
    grad.fill(0.0);
    let mut f = 0.0;
    for r in ratios.chunks_exact(d) {
        let s: f64 = p.iter().zip(r).map(|(a, b)| a * b).sum();
        f += s.ln();
        for (g, v) in grad.iter_mut().zip(r) {
            *g += v / s;
        }
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    f / n
}

fn residual(p: &[f64], g: &[f64]) -> f64 {
    p.iter()
        .zip(g)
        .map(|(p, g)| (p * (g - 1.0).abs()).max(g - 1.0))
        .fold(0.0, f64::max)
}

/// Maximizes the sample objective over long-only weights by exponentiated
/// gradient started at the market weights `x`, then blends toward uniform.
///
/// Starting at `x` makes a flat objective (e.g. `y = x`) return `x`.
pub fn log_optimal_from_samples(x: &[f64], samples: &[f64], margin: f64) -> Result<LogOptimalState> {
    let d = x.len();
    if samples.is_empty() || samples.len() % d != 0 {
        return Err(invalid("need at least one sample of the state's dimension"));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(invalid("margin must lie in [0, 1)"));
    }
    if let Some(s) = samples.chunks_exact(d).position(|y| y.iter().any(|&v| !(v > 0.0))) {
        return Err(Error::DegenerateSamples { index: s });
    }
    let ratios: Vec<f64> = samples
        .chunks_exact(d)
        .flat_map(|y| y.iter().zip(x).map(|(a, b)| a / b).collect::<Vec<_>>())
        .collect();
    let mut p = x.to_vec();
    let mut g = vec![0.0; d];
    let mut gq = vec![0.0; d];
    let mut f = objective(&ratios, d, &p, &mut g);
    let mut eta = 1.0;
    let mut iterations = 0;
    let mut res = residual(&p, &g);
    'outer: while res > TOLERANCE && iterations < MAX_ITER {
        iterations += 1;
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        loop {
            let mut q: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p * (eta * (g - top)).exp()).collect();
            let z: f64 = q.iter().sum();
            for v in q.iter_mut() {
                *v /= z;
            }
            let fq = objective(&ratios, d, &q, &mut gq);
            if fq >= f && q != p {
                p = q;
                f = fq;
                core::mem::swap(&mut g, &mut gq);
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
            if eta < 1e-16 {
                break 'outer;
            }
        }
        res = residual(&p, &g);
    }
    let u = margin / d as f64;
    let blended: Vec<f64> = p.iter().map(|v| (1.0 - margin) * v + u).collect();
    let value = sample_objective(x, samples, &blended);
    Ok(LogOptimalState {
        weights: blended,
        value,
        raw_weights: p,
        raw_value: f,
        iterations,
        residual: res,
    })
}

/// Log-optimal weights at `x` from `n` kernel draws on stream `(seed, 0)`.
pub fn log_optimal_state<K: MarkovKernel + ?Sized>(
    x: &SimplexPoint,
    kernel: &K,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<LogOptimalState> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let samples = kernel.batch(x.coords(), n, seed, 0)?;
    log_optimal_from_samples(x.coords(), &samples, margin)
}

/// Log-optimal weights and values tabulated on the interior states `k/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOptimalTable {
    pub dim: usize,
    pub resolution: usize,
    pub states: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub samples: usize,
    pub margin: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl LogOptimalTable {
    /// The tabulated map, interpolated over the state grid.
    pub fn to_map(&self) -> Result<PortfolioMapSpec> {
        Ok(PortfolioMapSpec::Table(TableMap::new(
            self.dim,
            self.resolution,
            self.weights.clone(),
            self.margin,
        )?))
    }
}

/// Solves the one-step program at every interior grid state `k/N`; state `i`
/// draws its samples from stream `(seed, i)`.
pub fn log_optimal_map<K: MarkovKernel + ?Sized>(
    kernel: &K,
    resolution: usize,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<LogOptimalTable> {
    let d = kernel.dim();
    let states = TableMap::states(d, resolution)?;
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let solved = crate::par::try_map_indexed(states.len(), |i| {
        let samples = kernel.batch(&states[i], n, seed, i as u64)?;
        log_optimal_from_samples(&states[i], &samples, margin)
    })?;
    Ok(LogOptimalTable {
        dim: d,
        resolution,
        max_iterations: solved.iter().map(|s| s.iterations).max().unwrap_or(0),
        max_residual: solved.iter().map(|s| s.residual).fold(0.0, f64::max),
        weights: solved.iter().map(|s| s.weights.clone()).collect(),
        values: solved.iter().map(|s| s.value).collect(),
        states,
        samples: n,
        margin,
    })
}

/// Continuous-time log-optimal weights `x_i (λ_i + 1 − Σ_j x_j λ_j)`.
///
/// The result may have negative entries; it is flagged long-only when it
/// has none.
pub fn numeraire_weights<D: Diffusion + ?Sized>(model: &D, x: &SimplexPoint) -> Result<PortfolioWeights> {
    let x = x.coords();
    let d = x.len();
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: d,
        });
    }
    let mut lambda = vec![0.0; d];
    model.risk_price(x, &mut lambda);
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLambda);
    }
    let mean: f64 = x.iter().zip(&lambda).map(|(a, b)| a * b).sum();
    let w: Vec<f64> = x.iter().zip(&lambda).map(|(a, l)| a * (l + 1.0 - mean)).collect();
    if w.iter().all(|&v| v >= 0.0) {
        PortfolioWeights::long_only(w, 0.0)
    } else {
        PortfolioWeights::on_hyperplane(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{DiffusionModel, FiniteKernel, IdentityKernel, WrightFisherSpec};
    use crate::portfolios::{fg_weights, GeneratorFunction};

    fn two_point(p_up: f64) -> FiniteKernel {
        FiniteKernel::new(
            &[
                SimplexPoint::new(&[2.0, 1.0]).unwrap(),
                SimplexPoint::new(&[1.0, 2.0]).unwrap(),
            ],
            &[p_up, 1.0 - p_up],
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_returns_the_market() {
        let x = SimplexPoint::new(&[0.2, 0.3, 0.5]).unwrap();
        let s = log_optimal_state(&x, &IdentityKernel { d: 3 }, 10, 0.0, 1).unwrap();
        assert_eq!(s.weights, x.coords());
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn two_point_interior_and_corner() {
        let x = SimplexPoint::new(&[0.5, 0.5]).unwrap();
        let s = log_optimal_state(&x, &two_point(0.6), 1000, 0.0, 0).unwrap();
        assert!((s.weights[0] - 0.8).abs() < 1e-8);
        assert!((s.value - (0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln())).abs() < 1e-12);
        let s = log_optimal_state(&x, &two_point(0.8), 1000, 0.0, 0).unwrap();
        assert!((s.weights[0] - 1.0).abs() < 1e-8);
        assert!((s.value - (0.8 * (4.0f64 / 3.0).ln() + 0.2 * (2.0f64 / 3.0).ln())).abs() < 1e-8);
    }

    #[test]
    fn blending_costs_at_most_log_one_minus_margin() {
        let x = SimplexPoint::new(&[0.5, 0.5]).unwrap();
        for eps in [1e-3, 0.05, 0.3] {
            let s = log_optimal_state(&x, &two_point(0.8), 500, eps, 0).unwrap();
            assert!(s.value >= s.raw_value + (1.0 - eps).ln() - 1e-10);
            assert!(s.weights.iter().all(|&w| w >= eps / 2.0));
        }
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        assert!(matches!(
            log_optimal_from_samples(&[0.5, 0.5], &[0.5, 0.5, 1.0, 0.0], 0.0),
            Err(Error::DegenerateSamples { index: 1 })
        ));
    }

    #[test]
    fn numeraire_weights_of_the_benchmark() {
        let wf = WrightFisherSpec::benchmark();
        let w = numeraire_weights(&wf, &SimplexPoint::new(&[0.6, 0.4]).unwrap()).unwrap();
        assert!((w.coords()[0] - 0.45).abs() < 1e-15 && (w.coords()[1] - 0.55).abs() < 1e-15);
        let g = GeneratorFunction::power_product(&[0.75, 0.75], 10.0);
        let x = SimplexPoint::new(&[0.13, 0.87]).unwrap();
        let a = numeraire_weights(&wf, &x).unwrap();
        let b = fg_weights(&g, &x).unwrap();
        for (u, v) in a.coords().iter().zip(b.coords()) {
            assert!((u - v).abs() < 1e-12);
        }
        let flat = DiffusionModel::Static { d: 2 };
        assert_eq!(numeraire_weights(&flat, &x).unwrap().coords(), x.coords());
    }

    #[test]
    fn identity_table_is_the_market() {
        let t = log_optimal_map(&IdentityKernel { d: 2 }, 8, 4, 0.0, 0).unwrap();
        for (s, w) in t.states.iter().zip(&t.weights) {
            assert_eq!(s, w);
        }
        assert!(t.values.iter().all(|&v| v == 0.0));
    }
}

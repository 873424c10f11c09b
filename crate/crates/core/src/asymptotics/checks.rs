use crate::error::{invalid, Error, Result};
use crate::markets::{euler_step_with, BoundaryRule, BoundaryStats, Diffusion, EulerScratch, MarkovKernel};
use crate::optimize::{log_optimal_from_samples, RetroResult};
use crate::portfolios::{MixtureMeasure, PortfolioMapSpec};
use crate::prelude::*;
use crate::rng;
use crate::simplex::{MarketPath, SimplexPoint};
use crate::stats::iid_estimate;
use crate::wealth::{wealth_universal, WealthMode};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Outcome of one check: `pass` is decided from `statistic` and `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<(f64, f64)>,
}

impl CheckRecord {
    /// Passes when `statistic ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, statistic: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            tolerance,
            pass: statistic.is_finite() && statistic <= tolerance,
            series: Vec::new(),
        }
    }
}

/// Lipschitz constant of `b ↦ log⟨b, r⟩` in ℓ₁ when every ratio lies in
/// `[c, C]`: `(C − c) / 2c`, reported together with `log(C/c)` as the larger
/// of the two.
pub fn ratio_lipschitz_constant(c: f64, big_c: f64) -> f64 {
    (big_c / c).ln().max((big_c - c) / (2.0 * c))
}

/// Sup-distance between two maps of the same constant or grid class: the
/// ℓ₁ distance of constant weights, or the largest node-wise ℓ₁ distance.
fn map_distance(a: &PortfolioMapSpec, b: &PortfolioMapSpec) -> Result<f64> {
    let l1 = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).abs()).sum::<f64>();
    match (a, b) {
        (PortfolioMapSpec::Constant(u), PortfolioMapSpec::Constant(v)) => Ok(l1(&u.weights, &v.weights)),
        (PortfolioMapSpec::Lipschitz(u), PortfolioMapSpec::Lipschitz(v))
            if u.dim == v.dim && u.resolution == v.resolution =>
        {
            Ok(u.values.iter().zip(&v.values).map(|(x, y)| l1(x, y)).fold(0.0, f64::max))
        }
        _ => Err(invalid("covering distances need constant maps or grid maps on one lattice")),
    }
}

/// Gap between the best map in hindsight and the mixture,
/// `(1/T)(log V*_T − log V_T(ν))`, against the covering bound
/// `(1/T) log(1/w_near) + K η`, where `w_near` is the mixture weight within
/// `η` of the best map and `K` bounds the per-step log-wealth sensitivity.
pub fn check_cover_gap(path: &MarketPath, mixture: &MixtureMeasure, retro: &RetroResult, eta: f64) -> Result<CheckRecord> {
    let horizon = path.horizon();
    if !(horizon > 0.0) {
        return Err(invalid("need a path with positive horizon"));
    }
    let mut w_near = 0.0;
    for a in &mixture.atoms {
        if map_distance(&a.map, &retro.map)? <= eta {
            w_near += a.weight;
        }
    }
    if !(w_near > 0.0) {
        return Err(Error::NoAtomInBall);
    }
    let universal = wealth_universal(path, mixture, WealthMode::Discrete)?.final_log();
    let gap = (retro.log_wealth - universal) / horizon;
    let (c, big_c) = path.ratio_bounds();
    let bound = (1.0 / w_near).ln() / horizon + ratio_lipschitz_constant(c, big_c) * eta;
    let mut rec = CheckRecord::at_most("cover_gap", gap, bound + 1e-12);
    rec.pass &= gap >= -1e-12;
    Ok(rec)
}

/// One-step conditional means of the mixture's wealth relative to a
/// reference portfolio (the log-optimal one): each of `n_paths` runs the
/// chain `steps` steps from `start`, updating the mixture posterior, then
/// records `⟨π_ν, y/x⟩ / ⟨π̂, y/x⟩` for one more draw. Passes when the mean
/// is at most `1 + 3 SE`.
pub fn check_supermartingale<K: MarkovKernel + ?Sized>(
    kernel: &K,
    mixture: &MixtureMeasure,
    reference: &PortfolioMapSpec,
    start: &SimplexPoint,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<CheckRecord> {
    let d = kernel.dim();
    mixture.validate()?;
    reference.validate(d)?;
    if n_paths == 0 {
        return Err(invalid("need at least one path"));
    }
    let ratios = crate::par::try_map_indexed(n_paths, |p| {
        let mut rng = rng::stream(seed, p as u64);
        let mut x = start.coords().to_vec();
        let mut y = vec![0.0; d];
        let mut logs: Vec<f64> = mixture.atoms.iter().map(|a| a.weight.ln()).collect();
        let mut w = vec![0.0; d];
        let mut pi = vec![0.0; d];
        for s in 0..=steps {
            kernel.sample_into(&x, &mut rng, &mut y)?;
            if s == steps {
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                pi.fill(0.0);
                let mut z = 0.0;
                for (a, l) in mixture.atoms.iter().zip(&logs) {
                    let post = (l - top).exp();
                    z += post;
                    a.map.weights_into(&x, &mut w)?;
                    for (p, v) in pi.iter_mut().zip(&w) {
                        *p += post * v;
                    }
                }
                reference.weights_into(&x, &mut w)?;
                let num: f64 = pi.iter().zip(&y).zip(&x).map(|((p, y), x)| p / z * y / x).sum();
                let den: f64 = w.iter().zip(&y).zip(&x).map(|((p, y), x)| p * y / x).sum();
                return Ok::<_, Error>(num / den);
            }
            for (a, l) in mixture.atoms.iter().zip(logs.iter_mut()) {
                a.map.weights_into(&x, &mut w)?;
                *l += w.iter().zip(&y).zip(&x).map(|((p, y), x)| p * y / x).sum::<f64>().ln();
            }
            core::mem::swap(&mut x, &mut y);
        }
        unreachable!()
    })?;
    let e = iid_estimate(&ratios);
    Ok(CheckRecord::at_most("supermartingale", e.value - 1.0, 3.0 * e.se))
}

/// At each state, solves the log-optimal program on `n` kernel draws and
/// checks `(1/n) Σ ⟨p, y/x⟩ / ⟨p̂, y/x⟩ ≤ 1` for `n_weights` random `p` on
/// the same draws, allowing `max(3 SE, 1e-8)`. The statistic is the worst
/// excess over that allowance.
pub fn check_leq1<K: MarkovKernel + ?Sized>(
    kernel: &K,
    states: &[Vec<f64>],
    n: usize,
    n_weights: usize,
    seed: u64,
) -> Result<CheckRecord> {
    let d = kernel.dim();
    let worst = crate::par::try_map_indexed(states.len(), |i| {
        let x = &states[i];
        let ys = kernel.batch(x, n, seed, i as u64)?;
        let opt = log_optimal_from_samples(x, &ys, 0.0)?;
        let mut rng = rng::stream(seed, (states.len() + i) as u64);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..n_weights {
            let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = e.iter().sum();
            let vals: Vec<f64> = ys
                .chunks_exact(d)
                .map(|y| {
                    let num: f64 = e.iter().zip(y).zip(x).map(|((p, y), x)| p / s * y / x).sum();
                    let den: f64 = opt.raw_weights.iter().zip(y).zip(x).map(|((p, y), x)| p * y / x).sum();
                    num / den
                })
                .collect();
            let est = iid_estimate(&vals);
            worst = worst.max(est.value - 1.0 - (3.0 * est.se).max(1e-8));
        }
        Ok::<_, Error>(worst)
    })?;
    Ok(CheckRecord::at_most(
        "leq1",
        worst.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        0.0,
    ))
}

/// Simulates the model and tracks the bracket `⟨M⟩_T = ∫ (π/μ)ᵀc(π/μ) dt`
/// of the martingale part of `log V^π`; reports `⟨M⟩_T / T` at `T = 1, 2,
/// 4, …` and passes when the last two values differ by at most 5%.
pub fn check_martingale_clt_premise<D: Diffusion + ?Sized>(
    model: &D,
    map: &PortfolioMapSpec,
    horizon: f64,
    dt: f64,
    start: &SimplexPoint,
    seed: u64,
) -> Result<CheckRecord> {
    let d = model.dim();
    map.validate(d)?;
    if !(dt > 0.0) || !(horizon >= dt) || start.dim() != d {
        return Err(invalid("need dt > 0, T ≥ dt and a start of the model's dimension"));
    }
    // streamed: long horizons would not fit as a stored path
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let mut rng = rng::stream(seed, 0);
    let mut scratch = EulerScratch::new(d);
    let mut stats = BoundaryStats::default();
    let mut x = start.coords().to_vec();
    let mut next = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut c = vec![0.0; d * d];
    let mut bracket = 0.0;
    let mut series = Vec::new();
    let mut checkpoint = 1.0;
    for t in 0..steps {
        map.weights_into(&x, &mut w)?;
        for (wi, xi) in w.iter_mut().zip(&x) {
            *wi /= xi;
        }
        model.covariance(&x, &mut c);
        bracket += crate::linalg::quad_form(&w, &c, &w) * dt;
        euler_step_with(model, &x, dt, BoundaryRule::default(), &mut rng, &mut next, &mut stats, &mut scratch, None)?;
        core::mem::swap(&mut x, &mut next);
        let now = (t + 1) as f64 * dt;
        if now >= checkpoint * (1.0 - 1e-9) {
            series.push((checkpoint, bracket / now));
            checkpoint *= 2.0;
        }
    }
    let statistic = match series.len() {
        0 | 1 => f64::INFINITY,
        n => {
            let (a, b) = (series[n - 2].1, series[n - 1].1);
            if a == 0.0 && b == 0.0 {
                0.0
            } else {
                (a - b).abs() / b.abs().max(a.abs())
            }
        }
    };
    let mut rec = CheckRecord::at_most("martingale_clt_premise", statistic, 0.05);
    rec.series = series;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{DiffusionModel, FiniteKernel, IdentityKernel, WrightFisherSpec};
    use crate::optimize::best_constant;
    use crate::portfolios::{sample_mixture, MixtureClass, Provenance};

    fn half_double(steps: usize) -> MarketPath {
        let rows: Vec<Vec<f64>> = (0..=steps)
            .map(|t| if t % 2 == 0 { vec![0.5, 0.5] } else { vec![2.0 / 3.0, 1.0 / 3.0] })
            .collect();
        MarketPath::discrete_from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_is_the_sharper_of_the_two_forms() {
        assert!((ratio_lipschitz_constant(0.5, 2.0) - 1.5).abs() < 1e-15);
        assert!((ratio_lipschitz_constant(0.9, 1.1) - (1.1f64 / 0.9).ln()).abs() < 1e-15);
    }

    #[test]
    fn single_optimal_atom_has_no_gap() {
        let path = half_double(100);
        let retro = best_constant(&path).unwrap();
        let mix = MixtureMeasure::uniform(
            vec![retro.map.clone()],
            Provenance {
                class: MixtureClass::Constant,
                ladder: None,
                seed: 0,
            },
        )
        .unwrap();
        let rec = check_cover_gap(&path, &mix, &retro, 0.0).unwrap();
        assert!(rec.pass && rec.statistic.abs() <= 1e-12);
    }

    #[test]
    fn cover_gap_of_uniform_atoms() {
        let mix = sample_mixture(&MixtureClass::Constant, 2, 1000, 11).unwrap();
        let mut last = f64::INFINITY;
        for steps in [100, 1000, 10_000] {
            let path = half_double(steps);
            let retro = best_constant(&path).unwrap();
            let rec = check_cover_gap(&path, &mix, &retro, 0.05).unwrap();
            assert!(rec.pass, "{rec:?}");
            assert!(rec.statistic <= last);
            last = rec.statistic;
        }
    }

    #[test]
    fn empty_ball_is_an_error() {
        let path = half_double(10);
        let retro = best_constant(&path).unwrap();
        let mix = MixtureMeasure::uniform(
            vec![PortfolioMapSpec::constant(&[1.0, 0.0]).unwrap()],
            Provenance {
                class: MixtureClass::Constant,
                ladder: None,
                seed: 0,
            },
        )
        .unwrap();
        assert!(matches!(check_cover_gap(&path, &mix, &retro, 0.01), Err(Error::NoAtomInBall)));
    }

    #[test]
    fn reference_against_itself_is_exactly_one() {
        let k = FiniteKernel::new(
            &[SimplexPoint::new(&[2.0, 1.0]).unwrap(), SimplexPoint::new(&[1.0, 2.0]).unwrap()],
            &[0.6, 0.4],
        )
        .unwrap();
        let pi = PortfolioMapSpec::constant(&[0.8, 0.2]).unwrap();
        let mix = MixtureMeasure::uniform(
            vec![pi.clone()],
            Provenance {
                class: MixtureClass::Constant,
                ladder: None,
                seed: 0,
            },
        )
        .unwrap();
        let x = SimplexPoint::new(&[0.5, 0.5]).unwrap();
        let rec = check_supermartingale(&k, &mix, &pi, &x, 3, 200, 1).unwrap();
        assert_eq!(rec.statistic, 0.0);
        assert!(rec.pass);
        let mix = sample_mixture(&MixtureClass::Constant, 2, 20, 2).unwrap();
        let rec = check_supermartingale(&IdentityKernel { d: 2 }, &mix, &pi, &x, 3, 50, 1).unwrap();
        assert!(rec.statistic.abs() < 1e-15);
    }

    #[test]
    fn leq1_on_two_point_kernels() {
        for p in [0.6, 0.8] {
            let k = FiniteKernel::new(
                &[SimplexPoint::new(&[2.0, 1.0]).unwrap(), SimplexPoint::new(&[1.0, 2.0]).unwrap()],
                &[p, 1.0 - p],
            )
            .unwrap();
            let rec = check_leq1(&k, &[vec![0.5, 0.5]], 1000, 100, 4).unwrap();
            assert!(rec.pass, "{rec:?}");
        }
    }

    #[test]
    fn bracket_of_static_model_is_zero() {
        let x = SimplexPoint::new(&[0.3, 0.7]).unwrap();
        let rec = check_martingale_clt_premise(
            &DiffusionModel::Static { d: 2 },
            &PortfolioMapSpec::constant(&[0.5, 0.5]).unwrap(),
            8.0,
            0.01,
            &x,
            1,
        )
        .unwrap();
        assert!(rec.pass);
        assert!(rec.series.iter().all(|s| s.1 == 0.0));
        let wf = WrightFisherSpec::benchmark();
        let rec = check_martingale_clt_premise(&wf, &PortfolioMapSpec::market(), 4.0, 1e-3, &x, 1).unwrap();
        assert!(rec.series.iter().all(|s| s.1.abs() < 1e-12));
    }
}

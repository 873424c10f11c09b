use crate::error::{invalid, Error, Result};
use crate::linalg::{mat_vec, psd_sqrt};
use crate::prelude::*;
use crate::rng::{self, StreamRng};
use crate::simplex::{MarketPath, PathKind, SimplexPoint};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Smallest coordinate an Euler step may produce.
pub const MIN_COORD: f64 = 1e-10;

/// A time-homogeneous diffusion on the simplex, `dμ = c λ dt + √c dW`.
///
/// `c(x)` must annihilate the all-ones vector and `1ᵀ c(x) λ(x)` must vanish,
/// so the weights keep summing to one.
pub trait Diffusion: Send + Sync {
    fn dim(&self) -> usize;

    /// Row-major `c(x)`.
    fn covariance(&self, x: &[f64], out: &mut [f64]);

    /// Market price of risk `λ(x)`.
    fn risk_price(&self, x: &[f64], out: &mut [f64]);

    /// Drift `c(x) λ(x)`.
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut c = vec![0.0; d * d];
        let mut lam = vec![0.0; d];
        self.covariance(x, &mut c);
        self.risk_price(x, &mut lam);
        out.copy_from_slice(&mat_vec(&c, &lam));
    }

    fn descriptor(&self) -> DiffusionModel;
}

/// Wright–Fisher diffusion: `c_ij = σ² x_i (δ_ij - x_j)`, `λ_i = (κ/σ²) θ_i / x_i`,
/// so the drift is `κ (θ - x)` and the invariant law is `Dirichlet(2κθ/σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrightFisherSpec {
    pub d: usize,
    pub kappa: f64,
    pub sigma2: f64,
    pub theta: Vec<f64>,
}

impl WrightFisherSpec {
    pub fn new(kappa: f64, sigma2: f64, theta: &[f64]) -> Result<Self> {
        if !(kappa > 0.0 && sigma2 > 0.0) || !kappa.is_finite() || !sigma2.is_finite() {
            return Err(invalid("kappa and sigma2 must be positive"));
        }
        let theta = SimplexPoint::new(theta)?.into_coords();
        Ok(Self {
            d: theta.len(),
            kappa,
            sigma2,
            theta,
        })
    }

    /// The benchmark market: d = 2, κ = 1.5, σ² = 1, θ = (½, ½).
    pub fn benchmark() -> Self {
        Self::new(1.5, 1.0, &[0.5, 0.5]).expect("valid benchmark")
    }

    /// Parameters `2κθ/σ²` of the invariant Dirichlet law.
    pub fn dirichlet_alpha(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|t| 2.0 * self.kappa * t / self.sigma2)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.theta.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.theta.len(),
            });
        }
        Self::new(self.kappa, self.sigma2, &self.theta).map(|_| ())
    }
}

impl Diffusion for WrightFisherSpec {
    fn dim(&self) -> usize {
        self.d
    }

    fn covariance(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = self.sigma2 * x[i] * (delta - x[j]);
            }
        }
    }

    fn risk_price(&self, x: &[f64], out: &mut [f64]) {
        let k = self.kappa / self.sigma2;
        for ((o, t), xi) in out.iter_mut().zip(&self.theta).zip(x) {
            *o = k * t / xi;
        }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for ((o, t), xi) in out.iter_mut().zip(&self.theta).zip(x) {
            *o = self.kappa * (t - xi);
        }
    }

    fn descriptor(&self) -> DiffusionModel {
        DiffusionModel::WrightFisher(self.clone())
    }
}

/// Serializable model descriptor, also usable directly as a [`Diffusion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DiffusionModel {
    WrightFisher(WrightFisherSpec),
    /// `c ≡ 0`, `λ ≡ 0`: the market never moves.
    Static {
        d: usize,
    },
}

impl DiffusionModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::WrightFisher(wf) => wf.validate(),
            Self::Static { d } if *d < 2 => Err(Error::DimensionTooSmall(*d)),
            Self::Static { .. } => Ok(()),
        }
    }
}

impl Diffusion for DiffusionModel {
    fn dim(&self) -> usize {
        match self {
            Self::WrightFisher(wf) => wf.d,
            Self::Static { d } => *d,
        }
    }

    fn covariance(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::WrightFisher(wf) => wf.covariance(x, out),
            Self::Static { .. } => out.fill(0.0),
        }
    }

    fn risk_price(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::WrightFisher(wf) => wf.risk_price(x, out),
            Self::Static { .. } => out.fill(0.0),
        }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::WrightFisher(wf) => wf.drift(x, out),
            Self::Static { .. } => out.fill(0.0),
        }
    }

    fn descriptor(&self) -> DiffusionModel {
        self.clone()
    }
}

/// What an Euler step does when a proposal leaves `{x ≥ MIN_COORD}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Clip coordinates at `MIN_COORD` and renormalize.
    Clip,
    /// Redraw the Gaussian increment up to `attempts` times, then clip.
    Redraw { attempts: u32 },
}

impl Default for BoundaryRule {
    fn default() -> Self {
        Self::Redraw { attempts: 64 }
    }
}

/// Counts of boundary interventions over a simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryStats {
    pub steps: u64,
    /// Steps where at least one proposal was redrawn.
    pub redrawn_steps: u64,
    /// Steps that ended with clipping.
    pub clipped_steps: u64,
}

impl BoundaryStats {
    /// Fraction of steps with any boundary intervention.
    pub fn intervention_rate(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        (self.redrawn_steps + self.clipped_steps) as f64 / self.steps as f64
    }

    pub fn merge(&mut self, other: &BoundaryStats) {
        self.steps += other.steps;
        self.redrawn_steps += other.redrawn_steps;
        self.clipped_steps += other.clipped_steps;
    }
}

/// Scratch buffers for repeated Euler steps.
pub(crate) struct EulerScratch {
    c: Vec<f64>,
    drift: Vec<f64>,
    root: Vec<f64>,
    xi: Vec<f64>,
}

impl EulerScratch {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            c: vec![0.0; d * d],
            drift: vec![0.0; d],
            root: vec![0.0; d * d],
            xi: vec![0.0; d],
        }
    }
}

/// One Euler–Maruyama step `x + c λ dt + √c √dt ξ` from `x` into `out`.
///
/// Proposals that leave `{x ≥ MIN_COORD}` are handled by `rule`.
pub fn euler_step<D: Diffusion + ?Sized>(
    spec: &D,
    x: &[f64],
    dt: f64,
    rule: BoundaryRule,
    rng: &mut StreamRng,
    out: &mut [f64],
    stats: &mut BoundaryStats,
) -> Result<()> {
    let mut scratch = EulerScratch::new(spec.dim());
    euler_step_with(spec, x, dt, rule, rng, out, stats, &mut scratch, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn euler_step_with<D: Diffusion + ?Sized>(
    spec: &D,
    x: &[f64],
    dt: f64,
    rule: BoundaryRule,
    rng: &mut StreamRng,
    out: &mut [f64],
    stats: &mut BoundaryStats,
    s: &mut EulerScratch,
    first_noise: Option<&[f64]>,
) -> Result<()> {
    let d = x.len();
    let sq = dt.sqrt();
    spec.covariance(x, &mut s.c);
    spec.drift(x, &mut s.drift);
    s.root.copy_from_slice(&psd_sqrt(&s.c, d));
    let attempts = match rule {
        BoundaryRule::Clip => 1,
        BoundaryRule::Redraw { attempts } => attempts.max(1),
    };
    stats.steps += 1;
    for attempt in 0..attempts {
        match first_noise {
            Some(noise) if attempt == 0 => s.xi.copy_from_slice(noise),
            _ => {
                for v in s.xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
        }
        for i in 0..d {
            let mut noise = 0.0;
            for j in 0..d {
                noise += s.root[i * d + j] * s.xi[j];
            }
            out[i] = x[i] + s.drift[i] * dt + noise * sq;
        }
        if out.iter().all(|v| v.is_finite() && *v >= MIN_COORD) {
            if attempt > 0 {
                stats.redrawn_steps += 1;
            }
            renormalize(out);
            return Ok(());
        }
    }
    if attempts > 1 {
        stats.redrawn_steps += 1;
    }
    stats.clipped_steps += 1;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState {
            step: stats.steps as usize,
        });
    }
    for v in out.iter_mut() {
        *v = v.max(MIN_COORD);
    }
    renormalize(out);
    Ok(())
}

fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Euler–Maruyama path on the grid `0, dt, …, ⌊T/dt⌋ dt`.
pub fn simulate_diffusion<D: Diffusion + ?Sized>(
    spec: &D,
    horizon: f64,
    dt: f64,
    mu0: &SimplexPoint,
    seed: u64,
) -> Result<MarketPath> {
    simulate_diffusion_with_stats(spec, horizon, dt, mu0, seed, BoundaryRule::default())
        .map(|r| r.0)
}

/// [`simulate_diffusion`] with an explicit boundary rule, also returning boundary counts.
pub fn simulate_diffusion_with_stats<D: Diffusion + ?Sized>(
    spec: &D,
    horizon: f64,
    dt: f64,
    mu0: &SimplexPoint,
    seed: u64,
    rule: BoundaryRule,
) -> Result<(MarketPath, BoundaryStats)> {
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(invalid("need dt > 0 and T ≥ dt"));
    }
    let d = spec.dim();
    if mu0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu0.dim(),
        });
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let mut rng = rng::stream(seed, 0);
    let mut points = Vec::with_capacity((steps + 1) * d);
    points.extend_from_slice(mu0.coords());
    let mut stats = BoundaryStats::default();
    let mut scratch = EulerScratch::new(d);
    let mut next = vec![0.0; d];
    for t in 0..steps {
        let x = &points[t * d..(t + 1) * d];
        euler_step_with(
            spec,
            x,
            dt,
            rule,
            &mut rng,
            &mut next,
            &mut stats,
            &mut scratch,
            None,
        )
        .map_err(|e| match e {
            Error::NonFiniteState { .. } => Error::NonFiniteState { step: t },
            e => e,
        })?;
        points.extend_from_slice(&next);
    }
    let times = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok((
        MarketPath::from_parts(PathKind::SampledContinuous, d, times, points),
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_vec;

    fn grid(d: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(11, 0);
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
                SimplexPoint::new(&raw).unwrap().into_coords()
            })
            .collect()
    }

    #[test]
    fn wright_fisher_structure_conditions() {
        let wf = WrightFisherSpec::new(0.7, 0.4, &[0.2, 0.3, 0.5]).unwrap();
        for x in grid(3, 100) {
            let mut c = vec![0.0; 9];
            let mut lam = vec![0.0; 3];
            wf.covariance(&x, &mut c);
            wf.risk_price(&x, &mut lam);
            let c1 = mat_vec(&c, &[1.0; 3]);
            assert!(c1.iter().all(|v| v.abs() <= 1e-10));
            let cl = mat_vec(&c, &lam);
            assert!(cl.iter().sum::<f64>().abs() <= 1e-10);
            let mut drift = vec![0.0; 3];
            wf.drift(&x, &mut drift);
            for (a, b) in drift.iter().zip(&cl) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_model_keeps_path_constant() {
        let m = DiffusionModel::Static { d: 3 };
        let mu0 = SimplexPoint::new(&[1.0, 2.0, 3.0]).unwrap();
        let p = simulate_diffusion(&m, 1.0, 0.01, &mu0, 5).unwrap();
        assert_eq!(p.len(), 101);
        for x in p.points() {
            for (a, b) in x.iter().zip(mu0.coords()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn same_seed_same_path() {
        let wf = WrightFisherSpec::benchmark();
        let mu0 = SimplexPoint::new(&[0.5, 0.5]).unwrap();
        let a = simulate_diffusion(&wf, 5.0, 1e-3, &mu0, 9).unwrap();
        let b = simulate_diffusion(&wf, 5.0, 1e-3, &mu0, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_diffusion(&wf, 5.0, 1e-3, &mu0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WrightFisherSpec::new(-1.0, 1.0, &[0.5, 0.5]).is_err());
        assert!(WrightFisherSpec::new(1.0, 1.0, &[0.5, 0.0]).is_err());
        let mu0 = SimplexPoint::new(&[0.5, 0.5]).unwrap();
        assert!(simulate_diffusion(&WrightFisherSpec::benchmark(), 1.0, 0.0, &mu0, 1).is_err());
    }

    #[test]
    fn huge_step_is_reported_not_hidden() {
        let wf = WrightFisherSpec::new(1e300, 1.0, &[0.5, 0.5]).unwrap();
        let mu0 = SimplexPoint::new(&[0.3, 0.7]).unwrap();
        let r = simulate_diffusion_with_stats(&wf, 1.0, 1e10, &mu0, 1, BoundaryRule::Clip);
        assert!(r.is_err() || r.unwrap().1.clipped_steps > 0);
    }
}

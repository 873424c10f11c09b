use super::diffusion::{
    euler_step_with, BoundaryRule, BoundaryStats, Diffusion, DiffusionModel, EulerScratch,
};
use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::rng::{self, StreamRng};
use crate::simplex::{MarketPath, PathKind, SimplexPoint, SUM_TOLERANCE};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Transition kernel `ρ(x, ·)` of a Markov chain on the open simplex.
///
/// Draws are pure functions of the state and the position in the random
/// stream, so a fixed seed reproduces every draw.
pub trait MarkovKernel: Send + Sync {
    fn dim(&self) -> usize;

    /// One draw `y ~ ρ(x, ·)` written into `out`.
    fn sample_into(&self, x: &[f64], rng: &mut StreamRng, out: &mut [f64]) -> Result<()>;

    /// `n` draws from `ρ(x, ·)` (flat, `n × d`) on stream `(seed, stream)`.
    fn batch(&self, x: &[f64], n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut rng = rng::stream(seed, stream);
        let mut out = vec![0.0; n * d];
        for chunk in out.chunks_mut(d) {
            self.sample_into(x, &mut rng, chunk)?;
        }
        Ok(out)
    }

    fn descriptor(&self) -> KernelDescriptor;
}

/// Serializable description of a kernel, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelDescriptor {
    Identity {
        d: usize,
    },
    Cycle {
        states: Vec<Vec<f64>>,
    },
    Finite {
        outcomes: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    },
    Euler {
        model: DiffusionModel,
        dt: f64,
        boundary: BoundaryRule,
    },
}

/// `y = x` almost surely.
#[derive(Debug, Clone, Copy)]
pub struct IdentityKernel {
    pub d: usize,
}

impl MarkovKernel for IdentityKernel {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample_into(&self, x: &[f64], _: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        Ok(())
    }

    fn descriptor(&self) -> KernelDescriptor {
        KernelDescriptor::Identity { d: self.d }
    }
}

/// Deterministic cycle through a list of states; from `x` it moves to the
/// successor of the listed state nearest to `x` (in ℓ₁).
#[derive(Debug, Clone)]
pub struct CycleKernel {
    states: Vec<Vec<f64>>,
}

impl CycleKernel {
    pub fn new(states: &[SimplexPoint]) -> Result<Self> {
        let d = states.first().map_or(0, |s| s.dim());
        if states.is_empty() || states.iter().any(|s| s.dim() != d) {
            return Err(invalid("cycle needs states of a common dimension"));
        }
        Ok(Self {
            states: states.iter().map(|s| s.coords().to_vec()).collect(),
        })
    }

    /// The two-state cycle `(½, ½) ↔ (⅔, ⅓)`.
    pub fn half_double() -> Self {
        Self {
            states: vec![vec![0.5, 0.5], vec![2.0 / 3.0, 1.0 / 3.0]],
        }
    }
}

impl MarkovKernel for CycleKernel {
    fn dim(&self) -> usize {
        self.states[0].len()
    }

    fn sample_into(&self, x: &[f64], _: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        let dist = |s: &Vec<f64>| s.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let (i, _) = self
            .states
            .iter()
            .enumerate()
            .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
            .expect("nonempty");
        out.copy_from_slice(&self.states[(i + 1) % self.states.len()]);
        Ok(())
    }

    fn descriptor(&self) -> KernelDescriptor {
        KernelDescriptor::Cycle {
            states: self.states.clone(),
        }
    }
}

/// State-independent kernel with finitely many outcomes.
///
/// Batches are stratified: outcome `k` appears `n p_k` times (largest
/// remainder rounding), so sample averages are exact up to rounding of counts.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    outcomes: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

impl FiniteKernel {
    pub fn new(outcomes: &[SimplexPoint], probabilities: &[f64]) -> Result<Self> {
        let d = outcomes.first().map_or(0, |s| s.dim());
        if outcomes.is_empty()
            || outcomes.len() != probabilities.len()
            || outcomes.iter().any(|s| s.dim() != d)
        {
            return Err(invalid("outcomes and probabilities must match"));
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid("probabilities must be nonnegative and sum to one"));
        }
        Ok(Self {
            outcomes: outcomes.iter().map(|s| s.coords().to_vec()).collect(),
            probabilities: probabilities.to_vec(),
        })
    }

    /// Outcome counts for a batch of `n`.
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let raw: Vec<f64> = self.probabilities.iter().map(|p| p * n as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| {
            (raw[b] - raw[b].floor())
                .total_cmp(&(raw[a] - raw[a].floor()))
                .then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

impl MarkovKernel for FiniteKernel {
    fn dim(&self) -> usize {
        self.outcomes[0].len()
    }

    fn sample_into(&self, _: &[f64], rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (o, p) in self.outcomes.iter().zip(&self.probabilities) {
            acc += p;
            if u < acc {
                out.copy_from_slice(o);
                return Ok(());
            }
        }
        out.copy_from_slice(self.outcomes.last().expect("nonempty"));
        Ok(())
    }

    fn batch(&self, _: &[f64], n: usize, _: u64, _: u64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n * self.dim());
        for (o, c) in self.outcomes.iter().zip(self.counts(n)) {
            for _ in 0..c {
                out.extend_from_slice(o);
            }
        }
        Ok(out)
    }

    fn descriptor(&self) -> KernelDescriptor {
        KernelDescriptor::Finite {
            outcomes: self.outcomes.clone(),
            probabilities: self.probabilities.clone(),
        }
    }
}

/// One Euler–Maruyama step of a diffusion as a Markov kernel.
///
/// Batches use antithetic pairs `(ξ, -ξ)`, which makes the sample mean of
/// the Gaussian increments vanish.
#[derive(Debug, Clone)]
pub struct EulerKernel {
    model: DiffusionModel,
    dt: f64,
    rule: BoundaryRule,
}

/// Euler kernel of `model` with step `dt` and the default boundary rule.
pub fn euler_kernel(model: DiffusionModel, dt: f64) -> Result<EulerKernel> {
    EulerKernel::new(model, dt, BoundaryRule::default())
}

impl EulerKernel {
    pub fn new(model: DiffusionModel, dt: f64, rule: BoundaryRule) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        model.validate()?;
        Ok(Self { model, dt, rule })
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `n` draws as in [`MarkovKernel::batch`], plus boundary counts.
    pub fn batch_with_stats(
        &self,
        x: &[f64],
        n: usize,
        seed: u64,
        stream: u64,
    ) -> Result<(Vec<f64>, BoundaryStats)> {
        let d = self.model.dim();
        let mut rng = rng::stream(seed, stream);
        let mut out = vec![0.0; n * d];
        let mut stats = BoundaryStats::default();
        let mut scratch = EulerScratch::new(d);
        let mut xi = vec![0.0; d];
        let mut neg = vec![0.0; d];
        for (k, chunk) in out.chunks_mut(d).enumerate() {
            if k % 2 == 0 {
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                euler_step_with(
                    &self.model,
                    x,
                    self.dt,
                    self.rule,
                    &mut rng,
                    chunk,
                    &mut stats,
                    &mut scratch,
                    Some(&xi),
                )?;
            } else {
                for (a, b) in neg.iter_mut().zip(&xi) {
                    *a = -b;
                }
                euler_step_with(
                    &self.model,
                    x,
                    self.dt,
                    self.rule,
                    &mut rng,
                    chunk,
                    &mut stats,
                    &mut scratch,
                    Some(&neg),
                )?;
            }
        }
        Ok((out, stats))
    }
}

impl MarkovKernel for EulerKernel {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn sample_into(&self, x: &[f64], rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        let mut stats = BoundaryStats::default();
        let mut scratch = EulerScratch::new(self.dim());
        euler_step_with(
            &self.model,
            x,
            self.dt,
            self.rule,
            rng,
            out,
            &mut stats,
            &mut scratch,
            None,
        )
    }

    fn batch(&self, x: &[f64], n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
        self.batch_with_stats(x, n, seed, stream).map(|r| r.0)
    }

    fn descriptor(&self) -> KernelDescriptor {
        KernelDescriptor::Euler {
            model: self.model.clone(),
            dt: self.dt,
            boundary: self.rule,
        }
    }
}

/// Runs the chain for `T` steps from `μ0` on stream `(seed, 0)`.
pub fn simulate_discrete<K: MarkovKernel + ?Sized>(
    kernel: &K,
    steps: usize,
    mu0: &SimplexPoint,
    seed: u64,
) -> Result<MarketPath> {
    if steps == 0 {
        return Err(invalid("need at least one step"));
    }
    let d = kernel.dim();
    if mu0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu0.dim(),
        });
    }
    let mut rng = rng::stream(seed, 0);
    let mut points = Vec::with_capacity((steps + 1) * d);
    points.extend_from_slice(mu0.coords());
    let mut next = vec![0.0; d];
    for t in 0..steps {
        let x = &points[t * d..(t + 1) * d];
        kernel.sample_into(x, &mut rng, &mut next)?;
        let s: f64 = next.iter().sum();
        if next.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::KernelProducedInvalidPoint { step: t + 1 });
        }
        points.extend_from_slice(&next);
    }
    let times = (0..=steps).map(|t| t as f64).collect();
    Ok(MarketPath::from_parts(PathKind::Discrete, d, times, points))
}

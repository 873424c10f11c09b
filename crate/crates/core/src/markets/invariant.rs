use super::diffusion::{simulate_diffusion_with_stats, BoundaryRule, Diffusion};
use super::kernel::{simulate_discrete, MarkovKernel};
use crate::error::{invalid, Result};
use crate::prelude::*;
use crate::simplex::SimplexPoint;

/// Points of a long trajectory collected after a burn-in, one per thinning
/// interval: an empirical stand-in for the invariant law.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSample {
    dim: usize,
    samples: Vec<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl InvariantSample {
    /// Wraps explicit points (flat, `n × d`).
    pub fn from_points(dim: usize, samples: Vec<f64>, seed: u64) -> Result<Self> {
        if dim < 2 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(invalid("need at least one point of dimension ≥ 2"));
        }
        Ok(Self {
            dim,
            samples,
            burn_in: 0,
            thinning: 1,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks(self.dim)
    }
}

fn check(n: usize, thinning: usize) -> Result<()> {
    if n == 0 || thinning == 0 {
        return Err(invalid("need n ≥ 1 and thinning ≥ 1"));
    }
    Ok(())
}

/// Thinned chain states after `burn_in` steps.
pub fn invariant_sample_kernel<K: MarkovKernel + ?Sized>(
    kernel: &K,
    mu0: &SimplexPoint,
    n: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<InvariantSample> {
    check(n, thinning)?;
    let steps = burn_in + (n - 1) * thinning;
    let d = kernel.dim();
    let samples = if steps == 0 {
        mu0.coords().to_vec()
    } else {
        let path = simulate_discrete(kernel, steps, mu0, seed)?;
        (0..n)
            .flat_map(|i| path.point(burn_in + i * thinning).to_vec())
            .collect()
    };
    Ok(InvariantSample {
        dim: d,
        samples,
        burn_in,
        thinning,
        seed,
    })
}

/// Thinned Euler states of a diffusion; `burn_in` and `thinning` count grid steps.
pub fn invariant_sample_diffusion<D: Diffusion + ?Sized>(
    spec: &D,
    dt: f64,
    mu0: &SimplexPoint,
    n: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<InvariantSample> {
    check(n, thinning)?;
    let steps = burn_in + (n - 1) * thinning;
    let samples = if steps == 0 {
        mu0.coords().to_vec()
    } else {
        let (path, _) = simulate_diffusion_with_stats(
            spec,
            steps as f64 * dt,
            dt,
            mu0,
            seed,
            BoundaryRule::default(),
        )?;
        (0..n)
            .flat_map(|i| path.point(burn_in + i * thinning).to_vec())
            .collect()
    };
    Ok(InvariantSample {
        dim: spec.dim(),
        samples,
        burn_in,
        thinning,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::IdentityKernel;

    #[test]
    fn identity_kernel_sample_is_the_start() {
        let mu0 = SimplexPoint::new(&[0.2, 0.8]).unwrap();
        let s = invariant_sample_kernel(&IdentityKernel { d: 2 }, &mu0, 10, 5, 3, 1).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.points().all(|p| p == mu0.coords()));
    }

    #[test]
    fn zero_count_is_rejected() {
        let mu0 = SimplexPoint::new(&[0.2, 0.8]).unwrap();
        assert!(invariant_sample_kernel(&IdentityKernel { d: 2 }, &mu0, 0, 5, 3, 1).is_err());
    }
}

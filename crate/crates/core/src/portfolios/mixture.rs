use super::generator::{certify_generator, Family, GeneratorFunction};
use super::lipschitz::{repair, LipschitzGridMap};
use super::map::{ConstantMap, PortfolioMapSpec};
use crate::error::{invalid, Error, Result};
use crate::par;
use crate::prelude::*;
use crate::rng::{self, StreamRng};
use crate::simplex::SimplexLattice;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Lattice resolution used when auditing sampled generators.
pub const CERTIFY_GRID: usize = 20;

/// Class from which mixture atoms are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum MixtureClass {
    /// Constant maps, flat Dirichlet on the closed simplex.
    Constant,
    /// Lipschitz grid maps with bound `M` on the lattice of the given
    /// resolution; the margin defaults to `min(1/M, 1)`.
    Lipschitz {
        #[serde(rename = "M")]
        m: f64,
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
    /// Functionally generated maps from one family, certified with bound `M`.
    Fg {
        #[serde(rename = "M")]
        m: f64,
        alpha: f64,
        family: Family,
    },
}

impl MixtureClass {
    /// Same class with the bound `M` replaced (constants have no bound).
    pub fn with_bound(&self, m: f64) -> Self {
        match self {
            Self::Constant => Self::Constant,
            Self::Lipschitz { resolution, .. } => Self::Lipschitz {
                m,
                resolution: *resolution,
                margin: None,
            },
            Self::Fg { family, .. } => Self::Fg {
                m,
                alpha: 1.0 / m,
                family: *family,
            },
        }
    }
}

/// How a mixture was drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub class: MixtureClass,
    /// `Some(M_max)` when atoms were spread over the ladder `M = 1, …, M_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub map: PortfolioMapSpec,
}

/// A finite probability measure over portfolio maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMeasure {
    pub atoms: Vec<Atom>,
    pub provenance: Provenance,
}

impl MixtureMeasure {
    pub fn new(atoms: Vec<Atom>, provenance: Provenance) -> Result<Self> {
        let m = Self { atoms, provenance };
        m.validate()?;
        Ok(m)
    }

    /// Equal weights over `maps`.
    pub fn uniform(maps: Vec<PortfolioMapSpec>, provenance: Provenance) -> Result<Self> {
        let w = 1.0 / maps.len().max(1) as f64;
        Self::new(
            maps.into_iter()
                .map(|map| Atom { weight: w, map })
                .collect(),
            provenance,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(invalid("a mixture needs at least one atom"));
        }
        let s: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if self.atoms.iter().any(|a| !(a.weight > 0.0)) || (s - 1.0).abs() > 1e-12 {
            return Err(invalid("atom weights must be positive and sum to one"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight)
            .fold(f64::INFINITY, f64::min)
    }
}

fn flat_dirichlet(d: usize, rng: &mut StreamRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn draw_atom(class: &MixtureClass, d: usize, rng: &mut StreamRng) -> Result<PortfolioMapSpec> {
    match class {
        MixtureClass::Constant => Ok(PortfolioMapSpec::Constant(ConstantMap {
            weights: flat_dirichlet(d, rng),
        })),
        MixtureClass::Lipschitz {
            m,
            resolution,
            margin,
        } => {
            let margin = margin.unwrap_or((1.0 / m).min(1.0));
            let lat = SimplexLattice::new(d, *resolution);
            let floor = margin / d as f64;
            let values: Vec<Vec<f64>> = (0..lat.len())
                .map(|_| {
                    flat_dirichlet(d, rng)
                        .iter()
                        .map(|v| floor + (1.0 - margin) * v)
                        .collect()
                })
                .collect();
            let values = repair(&lat, values, *m, floor);
            Ok(PortfolioMapSpec::Lipschitz(LipschitzGridMap::new(
                d,
                *resolution,
                values,
                *m,
                margin,
            )?))
        }
        MixtureClass::Fg { m, alpha, family } => {
            let bounds = family.parameter_box(d, *m);
            let mut tried = 0usize;
            loop {
                tried += 1;
                let params: Vec<f64> = bounds
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect();
                let g = GeneratorFunction::unchecked(*family, params, *m, *alpha);
                if certify_generator(&g, d, CERTIFY_GRID).pass {
                    return Ok(PortfolioMapSpec::Fg(g));
                }
                if tried >= 100 {
                    return Err(Error::RejectionBudgetExceeded { accepted: 0, tried });
                }
            }
        }
    }
}

/// `n_atoms` i.i.d. draws from `class` in dimension `d`, equally weighted.
///
/// Atom `k` is drawn from random stream `(seed, k)`.
pub fn sample_mixture(
    class: &MixtureClass,
    d: usize,
    n_atoms: usize,
    seed: u64,
) -> Result<MixtureMeasure> {
    if n_atoms == 0 {
        return Err(invalid("need at least one atom"));
    }
    let maps = par::try_map_indexed(n_atoms, |k| {
        let mut rng = rng::stream(seed, k as u64);
        draw_atom(class, d, &mut rng)
    })?;
    MixtureMeasure::uniform(
        maps,
        Provenance {
            class: class.clone(),
            ladder: None,
            seed,
        },
    )
}

/// Atoms spread over the ladder `M = 1, …, M_max` with counts proportional
/// to `2^{-M}` (largest-remainder rounding, at least one atom per rung while
/// atoms remain), all equally weighted.
pub fn sample_mixture_ladder(
    class: &MixtureClass,
    d: usize,
    m_max: u32,
    n_atoms: usize,
    seed: u64,
) -> Result<MixtureMeasure> {
    if n_atoms == 0 || m_max == 0 {
        return Err(invalid("need at least one atom and one rung"));
    }
    let counts = ladder_counts(m_max, n_atoms);
    let mut plan = Vec::with_capacity(n_atoms);
    for (rung, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            plan.push((rung + 1) as f64);
        }
    }
    let maps = par::try_map_indexed(plan.len(), |k| {
        let mut rng = rng::stream(seed, k as u64);
        draw_atom(&class.with_bound(plan[k]), d, &mut rng)
    })?;
    MixtureMeasure::uniform(
        maps,
        Provenance {
            class: class.clone(),
            ladder: Some(m_max),
            seed,
        },
    )
}

/// Atom counts per rung `M = 1..=m_max`, proportional to `2^{-M}`.
pub fn ladder_counts(m_max: u32, n_atoms: usize) -> Vec<usize> {
    let raw: Vec<f64> = (1..=m_max).map(|m| 0.5f64.powi(m as i32)).collect();
    let z: f64 = raw.iter().sum();
    let target: Vec<f64> = raw.iter().map(|r| r / z * n_atoms as f64).collect();
    let mut counts: Vec<usize> = target.iter().map(|t| t.floor() as usize).collect();
    let mut left = n_atoms - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&a, &b| {
        (target[b] - target[b].floor())
            .total_cmp(&(target[a] - target[a].floor()))
            .then(a.cmp(&b))
    });
    for &k in order.iter() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolios::certify_lipschitz;

    #[test]
    fn constant_atoms_average_to_the_barycenter() {
        let mix = sample_mixture(&MixtureClass::Constant, 3, 10_000, 4).unwrap();
        let mut mean = [0.0; 3];
        let mut sq = [0.0; 3];
        for a in &mix.atoms {
            if let PortfolioMapSpec::Constant(c) = &a.map {
                for k in 0..3 {
                    mean[k] += c.weights[k] / 1e4;
                    sq[k] += c.weights[k] * c.weights[k] / 1e4;
                }
            }
        }
        for k in 0..3 {
            let se = ((sq[k] - mean[k] * mean[k]) / 1e4).sqrt();
            assert!((mean[k] - 1.0 / 3.0).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn lipschitz_atoms_are_certified() {
        let class = MixtureClass::Lipschitz {
            m: 5.0,
            resolution: 8,
            margin: None,
        };
        let mix = sample_mixture(&class, 3, 20, 1).unwrap();
        for a in &mix.atoms {
            let PortfolioMapSpec::Lipschitz(l) = &a.map else {
                panic!()
            };
            let c = certify_lipschitz(l);
            assert!(c <= 5.0, "certified {c}");
            assert!(l.values.iter().flatten().all(|&v| v >= 0.2 / 3.0 - 1e-15));
        }
    }

    #[test]
    fn fg_atoms_pass_certification() {
        for family in Family::ALL {
            let class = MixtureClass::Fg {
                m: 4.0,
                alpha: 0.25,
                family,
            };
            let mix = sample_mixture(&class, 2, 10, 2).unwrap();
            for a in &mix.atoms {
                let PortfolioMapSpec::Fg(g) = &a.map else {
                    panic!()
                };
                assert!(certify_generator(g, 2, CERTIFY_GRID).pass);
            }
        }
    }

    #[test]
    fn ladder_counts_halve() {
        assert_eq!(ladder_counts(3, 7), vec![4, 2, 1]);
        assert_eq!(ladder_counts(4, 1000).iter().sum::<usize>(), 1000);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_mixture(&MixtureClass::Constant, 2, 50, 3).unwrap();
        let b = sample_mixture(&MixtureClass::Constant, 2, 50, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.atoms.iter().map(|x| x.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

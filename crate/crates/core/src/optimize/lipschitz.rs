use super::constant::best_constant;
use super::{RetroResult, SolverTrace};
use crate::error::{invalid, Error, Result};
use crate::portfolios::{project_into_class, LipschitzGridMap, PortfolioMapSpec};
use crate::prelude::*;
use crate::rng;
use crate::simplex::{project_to_margin, Cell, MarketPath, PortfolioWeights, SimplexLattice};
use crate::wealth::wealth_discrete;
use rand::Rng;
use rand_distr::Exp1;

/// Settings for the Lipschitz-class search.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzSearch {
    pub m: f64,
    pub resolution: usize,
    /// Node floor is `margin / d`; defaults to `min(1/M, 1)`.
    pub margin: Option<f64>,
    /// Dykstra sweeps per projection.
    pub sweeps: usize,
    pub max_iter: usize,
    /// Seed of the random starts.
    pub seed: u64,
}

impl LipschitzSearch {
    pub fn new(m: f64, resolution: usize) -> Self {
        Self {
            m,
            resolution,
            margin: None,
            sweeps: 50,
            max_iter: 2000,
            seed: 0,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or(if self.m > 0.0 { (1.0 / self.m).min(1.0) } else { 1.0 })
    }
}

struct Objective<'a> {
    d: usize,
    cells: Vec<Cell>,
    ratios: Vec<f64>,
    /// Visit mass of each node, used to scale its step.
    mass: Vec<f64>,
    lat: &'a SimplexLattice,
}

impl Objective<'_> {
    fn value(&self, x: &[Vec<f64>]) -> f64 {
        let d = self.d;
        let mut f = 0.0;
        for (cell, r) in self.cells.iter().zip(self.ratios.chunks_exact(d)) {
            let mut s = 0.0;
            for (&v, &l) in cell.nodes.iter().zip(&cell.weights) {
                s += l * x[v].iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
            }
            f += s.ln();
        }
        f / self.cells.len() as f64
    }

    fn gradient(&self, x: &[Vec<f64>], g: &mut [Vec<f64>]) {
        let d = self.d;
        for gv in g.iter_mut() {
            gv.fill(0.0);
        }
        let n = self.cells.len() as f64;
        for (cell, r) in self.cells.iter().zip(self.ratios.chunks_exact(d)) {
            let mut s = 0.0;
            for (&v, &l) in cell.nodes.iter().zip(&cell.weights) {
                s += l * x[v].iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
            }
            for (&v, &l) in cell.nodes.iter().zip(&cell.weights) {
                for k in 0..d {
                    g[v][k] += l * r[k] / (s * n);
                }
            }
        }
    }
}

fn ascend(obj: &Objective, start: Vec<Vec<f64>>, s: &LipschitzSearch) -> (Vec<Vec<f64>>, f64, usize) {
    let margin = s.margin();
    let mut x = start;
    let mut f = obj.value(&x);
    let mut g = vec![vec![0.0; obj.d]; x.len()];
    let mut eta = 0.5;
    let mut iterations = 0;
    while iterations < s.max_iter && eta > 1e-14 {
        iterations += 1;
        obj.gradient(&x, &mut g);
        let y: Vec<Vec<f64>> = x
            .iter()
            .zip(&g)
            .zip(&obj.mass)
            .map(|((xv, gv), &w)| {
                let scale = eta / w.max(1e-3);
                xv.iter().zip(gv).map(|(a, b)| a + scale * b).collect()
            })
            .collect();
        let c = project_into_class(obj.lat, &y, s.m, margin, s.sweeps);
        let fc = obj.value(&c);
        if fc > f {
            let gain = fc - f;
            x = c;
            f = fc;
            eta = (eta * 2.0).min(1e3);
            if gain <= 1e-15 * (1.0 + f.abs()) {
                break;
            }
        } else {
            eta *= 0.5;
        }
    }
    (x, f, iterations)
}

/// Best map in the Lipschitz grid class with the default search settings.
pub fn best_lipschitz(path: &MarketPath, m: f64, resolution: usize) -> Result<RetroResult> {
    best_lipschitz_with(path, &LipschitzSearch::new(m, resolution), &[])
}

/// Best map in the Lipschitz grid class, also starting from each of
/// `warm_starts` (node-value tables, projected into the class first).
///
/// Every start is improved monotonically, so the result is never worse than
/// the best projected start.
pub fn best_lipschitz_with(
    path: &MarketPath,
    search: &LipschitzSearch,
    warm_starts: &[Vec<Vec<f64>>],
) -> Result<RetroResult> {
    if path.steps() == 0 {
        return Err(invalid("need at least two path points"));
    }
    if !(search.m >= 0.0) || search.resolution == 0 {
        return Err(invalid("need M ≥ 0 and a positive resolution"));
    }
    let d = path.dim();
    let lat = SimplexLattice::new(d, search.resolution);
    let margin = search.margin();
    let cells: Vec<Cell> = crate::par::map_indexed(path.steps(), |t| lat.locate(path.point(t)));
    let mut ratios = Vec::with_capacity(path.steps() * d);
    for t in 0..path.steps() {
        ratios.extend(path.ratio(t));
    }
    let mut mass = vec![0.0; lat.len()];
    for cell in &cells {
        for (&v, &l) in cell.nodes.iter().zip(&cell.weights) {
            mass[v] += l / cells.len() as f64;
        }
    }
    let obj = Objective {
        d,
        cells,
        ratios,
        mass,
        lat: &lat,
    };

    let spread = |w: &[f64]| vec![w.to_vec(); lat.len()];
    let mut starts: Vec<Vec<Vec<f64>>> = warm_starts.to_vec();
    let b = match best_constant(path)?.map {
        PortfolioMapSpec::Constant(c) => c.weights,
        _ => unreachable!(),
    };
    let b = project_to_margin(&PortfolioWeights::long_only(b, 0.0)?, margin)?;
    starts.push(spread(b.coords()));
    starts.push(spread(&vec![1.0 / d as f64; d]));
    starts.push((0..lat.len()).map(|i| lat.point(i)).collect());
    let mut rng = rng::stream(search.seed, 0);
    let draw: Vec<Vec<f64>> = (0..lat.len())
        .map(|_| {
            let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect();
    starts.push(draw);

    let n_starts = starts.len();
    let runs = crate::par::map_indexed(n_starts, |k| {
        let x0 = project_into_class(&lat, &starts[k], search.m, margin, search.sweeps);
        ascend(&obj, x0, search)
    });
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut iterations = 0;
    for (x, f, it) in runs {
        iterations += it;
        if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
            best = Some((x, f));
        }
    }
    let (values, _) = best.expect("at least one start");
    let certified = crate::portfolios::lattice_lipschitz(&lat, &values);
    if certified > search.m {
        return Err(Error::CertificationFailed {
            certified,
            bound: search.m,
        });
    }
    let map = PortfolioMapSpec::Lipschitz(LipschitzGridMap::new(d, search.resolution, values, search.m, margin)?);
    let log_wealth = wealth_discrete(path, &map)?.final_log();
    let mut g = vec![vec![0.0; d]; lat.len()];
    if let PortfolioMapSpec::Lipschitz(l) = &map {
        obj.gradient(&l.values, &mut g);
    }
    let gradient_norm = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    Ok(RetroResult {
        map,
        log_wealth,
        trace: SolverTrace {
            iterations,
            starts: n_starts,
            gradient_norm,
        },
    })
}

use super::engines::{log_factor, wealth_master_equation, WealthCurve};
use crate::error::{invalid, Error, Result};
use crate::par;
use crate::portfolios::{MixtureMeasure, PortfolioMapSpec};
use crate::prelude::*;
use crate::simplex::{Cell, MarketPath, PortfolioWeights, SimplexLattice};
use serde::{Deserialize, Serialize};

/// Which engine computes each atom's wealth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WealthMode {
    Discrete,
    MasterEquation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Grid {
    Lattice { dim: usize, resolution: usize },
    Table { dim: usize, resolution: usize },
}

impl Grid {
    fn of(map: &PortfolioMapSpec) -> Option<Self> {
        match map {
            PortfolioMapSpec::Lipschitz(l) => Some(Self::Lattice {
                dim: l.dim,
                resolution: l.resolution,
            }),
            PortfolioMapSpec::Table(t) => Some(Self::Table {
                dim: t.dim,
                resolution: t.resolution,
            }),
            _ => None,
        }
    }
}

/// Interpolation cells of every path point, shared by all grid-based maps
/// with the same lattice.
#[derive(Debug, Clone, Default)]
pub struct PathCells {
    grids: Vec<(Grid, Vec<Cell>)>,
}

impl PathCells {
    pub fn build<'a>(
        path: &MarketPath,
        maps: impl IntoIterator<Item = &'a PortfolioMapSpec>,
    ) -> Self {
        let mut out = Self::default();
        for map in maps {
            let Some(grid) = Grid::of(map) else { continue };
            if out.grids.iter().any(|(g, _)| *g == grid) {
                continue;
            }
            let cells = match (grid, map) {
                (Grid::Lattice { dim, resolution }, _) => {
                    let lat = SimplexLattice::new(dim, resolution);
                    par::map_indexed(path.len(), |t| lat.locate(path.point(t)))
                }
                (Grid::Table { .. }, PortfolioMapSpec::Table(table)) => {
                    par::map_indexed(path.len(), |t| table.locate(path.point(t)))
                }
                _ => continue,
            };
            out.grids.push((grid, cells));
        }
        out
    }

    /// `π(μ_t)`, using a cached cell when one exists.
    pub fn weights_into(
        &self,
        map: &PortfolioMapSpec,
        path: &MarketPath,
        t: usize,
        out: &mut [f64],
    ) -> Result<()> {
        if let Some(grid) = Grid::of(map) {
            if let Some((_, cells)) = self.grids.iter().find(|(g, _)| *g == grid) {
                match map {
                    PortfolioMapSpec::Lipschitz(l) => l.weights_at_cell(&cells[t], out),
                    PortfolioMapSpec::Table(tb) => tb.weights_at_cell(&cells[t], out),
                    _ => unreachable!(),
                }
                return Ok(());
            }
        }
        map.weights_into(path.point(t), out)
    }
}

fn discrete_logs(path: &MarketPath, map: &PortfolioMapSpec, cells: &PathCells) -> Result<Vec<f64>> {
    let d = path.dim();
    let mut w = vec![0.0; d];
    let mut logs = Vec::with_capacity(path.len());
    logs.push(0.0);
    let mut acc = 0.0;
    for t in 0..path.steps() {
        cells.weights_into(map, path, t, &mut w)?;
        acc += log_factor(&w, path.point(t), path.point(t + 1), t)?;
        logs.push(acc);
    }
    Ok(logs)
}

fn atom_logs(
    path: &MarketPath,
    map: &PortfolioMapSpec,
    mode: WealthMode,
    cells: &PathCells,
) -> Result<Vec<f64>> {
    match mode {
        WealthMode::Discrete => discrete_logs(path, map, cells),
        WealthMode::MasterEquation => match map {
            PortfolioMapSpec::Fg(g) => wealth_master_equation(path, g).map(|c| c.log_values),
            _ => Err(invalid(
                "the master equation applies to generated maps only",
            )),
        },
    }
}

/// `log(e^a + e^b)`, exact when either side is `−∞`.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Mixture wealth together with each atom's final log-wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalWealth {
    pub curve: WealthCurve,
    pub atom_final_log: Vec<f64>,
}

/// `V_t(ν) = Σ_k w_k V^{π_k}_t`.
///
/// Atoms are evaluated in parallel in chunks, and folded into the running
/// log-sum in index order, so the result does not depend on thread count.
pub fn wealth_universal(
    path: &MarketPath,
    mixture: &MixtureMeasure,
    mode: WealthMode,
) -> Result<WealthCurve> {
    wealth_universal_detailed(path, mixture, mode).map(|u| u.curve)
}

pub fn wealth_universal_detailed(
    path: &MarketPath,
    mixture: &MixtureMeasure,
    mode: WealthMode,
) -> Result<UniversalWealth> {
    mixture.validate()?;
    let d = path.dim();
    for a in &mixture.atoms {
        a.map.validate(d)?;
    }
    if mode == WealthMode::MasterEquation && !path.has_qv() {
        return Err(Error::MissingQv);
    }
    let cells = match mode {
        WealthMode::Discrete => PathCells::build(path, mixture.atoms.iter().map(|a| &a.map)),
        WealthMode::MasterEquation => PathCells::default(),
    };
    let n = path.len();
    let chunk = ((1usize << 22) / n.max(1)).clamp(1, 256);
    let mut running = vec![f64::NEG_INFINITY; n];
    let mut finals = Vec::with_capacity(mixture.len());
    let mut start = 0;
    while start < mixture.len() {
        let end = (start + chunk).min(mixture.len());
        let curves = par::try_map_indexed(end - start, |j| {
            atom_logs(path, &mixture.atoms[start + j].map, mode, &cells)
        })?;
        for (j, logs) in curves.iter().enumerate() {
            let lw = mixture.atoms[start + j].weight.ln();
            for (r, l) in running.iter_mut().zip(logs) {
                *r = log_add(*r, lw + l);
            }
            finals.push(*logs.last().unwrap_or(&0.0));
        }
        start = end;
    }
    // the weights sum to one up to rounding; pin V_0 = 1
    let base = running[0];
    for r in running.iter_mut() {
        *r -= base;
    }
    Ok(UniversalWealth {
        curve: WealthCurve::new(path.times().to_vec(), running, "universal"),
        atom_final_log: finals,
    })
}

/// Weights of the mixture portfolio at path index `t`: the average of the
/// atoms' weights at `μ_t` under the posterior `∝ w_k V^{π_k}_t`.
pub fn universal_weights_at(
    path: &MarketPath,
    mixture: &MixtureMeasure,
    t: usize,
) -> Result<PortfolioWeights> {
    if t >= path.len() {
        return Err(invalid("time index beyond the path"));
    }
    mixture.validate()?;
    let d = path.dim();
    let prefix = path.prefix(t);
    let cells = PathCells::build(&prefix, mixture.atoms.iter().map(|a| &a.map));
    let logs = par::try_map_indexed(mixture.len(), |k| {
        let a = &mixture.atoms[k];
        a.map.validate(d)?;
        let l = discrete_logs(&prefix, &a.map, &cells)?;
        let mut w = vec![0.0; d];
        cells.weights_into(&a.map, &prefix, t, &mut w)?;
        Ok::<_, Error>((a.weight.ln() + l[t], w))
    })?;
    let top = logs
        .iter()
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; d];
    let mut z = 0.0;
    for (l, w) in &logs {
        let p = (l - top).exp();
        z += p;
        for (o, v) in out.iter_mut().zip(w) {
            *o += p * v;
        }
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    let s: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= s;
    }
    PortfolioWeights::long_only(out, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_diffusion, WrightFisherSpec};
    use crate::portfolios::{sample_mixture, Atom, MixtureClass, Provenance};
    use crate::simplex::SimplexPoint;
    use crate::wealth::wealth_discrete;

    fn prov() -> Provenance {
        Provenance {
            class: MixtureClass::Constant,
            ladder: None,
            seed: 0,
        }
    }

    fn path() -> MarketPath {
        simulate_diffusion(
            &WrightFisherSpec::benchmark(),
            2.0,
            1e-3,
            &SimplexPoint::new(&[0.3, 0.7]).unwrap(),
            5,
        )
        .unwrap()
    }

    #[test]
    fn single_atom_is_that_map() {
        let map = PortfolioMapSpec::constant(&[0.2, 0.8]).unwrap();
        let mix = MixtureMeasure::uniform(vec![map.clone()], prov()).unwrap();
        let p = path();
        let u = wealth_universal(&p, &mix, WealthMode::Discrete).unwrap();
        assert_eq!(u.log_values, wealth_discrete(&p, &map).unwrap().log_values);
        let w = universal_weights_at(&p, &mix, 100).unwrap();
        assert!((w.coords()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn vertex_pair_averages_price_relatives() {
        let maps = vec![
            PortfolioMapSpec::constant(&[1.0, 0.0]).unwrap(),
            PortfolioMapSpec::constant(&[0.0, 1.0]).unwrap(),
        ];
        let mix = MixtureMeasure::uniform(maps, prov()).unwrap();
        let p = path();
        let u = wealth_universal(&p, &mix, WealthMode::Discrete).unwrap();
        let (a, b) = (p.point(0), p.point(p.steps()));
        let expect = 0.5 * (b[0] / a[0] + b[1] / a[1]);
        assert!((u.final_log() - expect.ln()).abs() < 1e-12);
    }

    #[test]
    fn mixture_dominates_each_atom() {
        let mix = sample_mixture(&MixtureClass::Constant, 2, 300, 8).unwrap();
        let p = path();
        let u = wealth_universal_detailed(&p, &mix, WealthMode::Discrete).unwrap();
        for (a, f) in mix.atoms.iter().zip(&u.atom_final_log) {
            assert!(u.curve.final_log() >= a.weight.ln() + f - 1e-12);
        }
        assert_eq!(u.curve.log_values[0], 0.0);
    }

    #[test]
    fn weights_start_at_the_prior_mean() {
        let mix = sample_mixture(&MixtureClass::Constant, 3, 50, 1).unwrap();
        let p = simulate_diffusion(
            &WrightFisherSpec::new(1.0, 1.0, &[0.3, 0.3, 0.4]).unwrap(),
            0.1,
            1e-3,
            &SimplexPoint::new(&[0.2, 0.3, 0.5]).unwrap(),
            2,
        )
        .unwrap();
        let w = universal_weights_at(&p, &mix, 0).unwrap();
        for k in 0..3 {
            let mean: f64 = mix
                .atoms
                .iter()
                .map(|a| match &a.map {
                    PortfolioMapSpec::Constant(c) => c.weights[k] * a.weight,
                    _ => unreachable!(),
                })
                .sum();
            assert!((w.coords()[k] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_atom_takes_over() {
        // the first atom gains e^50 over the second along a two-point path
        let r = (-50.0f64).exp();
        let p = MarketPath::discrete_from_rows(&[
            vec![0.5, 0.5],
            vec![1.0 - r / 2.0, r / 2.0],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let atoms = vec![
            Atom {
                weight: 0.5,
                map: PortfolioMapSpec::constant(&[1.0, 0.0]).unwrap(),
            },
            Atom {
                weight: 0.5,
                map: PortfolioMapSpec::constant(&[0.0, 1.0]).unwrap(),
            },
        ];
        let mix = MixtureMeasure::new(atoms, prov()).unwrap();
        let w = universal_weights_at(&p, &mix, 1).unwrap();
        assert!((w.coords()[0] - 1.0).abs() + w.coords()[1] <= 1e-12);
    }

    #[test]
    fn log_add_is_exact_at_the_edges() {
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-16);
    }
}

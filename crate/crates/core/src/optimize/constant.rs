use super::{RetroResult, SolverTrace};
use crate::error::{invalid, Result};
use crate::portfolios::PortfolioMapSpec;
use crate::prelude::*;
use crate::simplex::{project_onto_simplex, MarketPath};
use crate::wealth::wealth_discrete;

const MAX_ITER: usize = 50_000;
const TOLERANCE: f64 = 1e-10;

/// Average log-growth `(1/T) Σ_t log⟨b, r_t⟩` and its gradient, for flat
/// one-step ratios `r` (`T × d`).
pub fn constant_objective(ratios: &[f64], d: usize, b: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let steps = ratios.len() / d;
    let mut f = 0.0;
    match grad {
        Some(g) => {
            g.fill(0.0);
            for r in ratios.chunks_exact(d) {
                let s: f64 = b.iter().zip(r).map(|(a, c)| a * c).sum();
                f += s.ln();
                for (gi, ri) in g.iter_mut().zip(r) {
                    *gi += ri / s;
                }
            }
            for gi in g.iter_mut() {
                *gi /= steps as f64;
            }
        }
        None => {
            for r in ratios.chunks_exact(d) {
                f += b.iter().zip(r).map(|(a, c)| a * c).sum::<f64>().ln();
            }
        }
    }
    f / steps as f64
}

fn step(b: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let y: Vec<f64> = b.iter().zip(g).map(|(a, c)| a + eta * c).collect();
    project_onto_simplex(&y, 0.0)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The constant-rebalanced portfolio with the largest wealth on `path`.
///
/// Projected gradient ascent from uniform weights with a backtracking step,
/// stopped when the unit-step gradient mapping falls below `1e-10`.
pub fn best_constant(path: &MarketPath) -> Result<RetroResult> {
    if path.steps() == 0 {
        return Err(invalid("need at least two path points"));
    }
    let d = path.dim();
    let mut ratios = Vec::with_capacity(path.steps() * d);
    for t in 0..path.steps() {
        ratios.extend(path.ratio(t));
    }
    let mut b = vec![1.0 / d as f64; d];
    let mut g = vec![0.0; d];
    let mut f = constant_objective(&ratios, d, &b, Some(&mut g));
    let mut eta = 1.0;
    let mut iterations = 0;
    let mut gm = distance(&b, &step(&b, &g, 1.0));
    while gm > TOLERANCE && iterations < MAX_ITER {
        iterations += 1;
        let mut moved = false;
        while eta > 1e-20 {
            let c = step(&b, &g, eta);
            let fc = constant_objective(&ratios, d, &c, None);
            let lin: f64 = g.iter().zip(c.iter().zip(&b)).map(|(gi, (ci, bi))| gi * (ci - bi)).sum();
            let sq = distance(&c, &b).powi(2);
            if fc >= f + lin - sq / (2.0 * eta) {
                moved = fc >= f;
                if moved {
                    b = c;
                }
                break;
            }
            // below rounding of the objective, judge by the gradient mapping
            if (fc - f).abs() <= 1e-15 * (1.0 + f.abs()) {
                let mut gc = vec![0.0; d];
                constant_objective(&ratios, d, &c, Some(&mut gc));
                if distance(&c, &step(&c, &gc, 1.0)) < gm {
                    b = c;
                    moved = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
        f = constant_objective(&ratios, d, &b, Some(&mut g));
        gm = distance(&b, &step(&b, &g, 1.0));
        eta *= 2.0;
    }
    let map = PortfolioMapSpec::constant(&b)?;
    let log_wealth = wealth_discrete(path, &map)?.final_log();
    Ok(RetroResult {
        map,
        log_wealth,
        trace: SolverTrace {
            iterations,
            starts: 1,
            gradient_norm: gm,
        },
    })
}

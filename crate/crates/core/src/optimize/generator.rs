use super::{RetroResult, SolverTrace};
use crate::error::{Error, Result};
use crate::portfolios::{certify_generator, Family, GeneratorFunction, PortfolioMapSpec, CERTIFY_GRID};
use crate::prelude::*;
use crate::rng;
use crate::simplex::MarketPath;
use crate::wealth::wealth_master_equation;
use rand::Rng;

const STARTS: usize = 16;
const MAX_ITER: usize = 200;

/// QV increments of every step, flat `steps × d × d`.
fn increments(path: &MarketPath) -> Result<Vec<f64>> {
    if !path.has_qv() {
        return Err(Error::MissingQv);
    }
    let mut out = Vec::with_capacity(path.steps() * path.dim() * path.dim());
    for t in 0..path.steps() {
        out.extend(path.qv_increment(t).ok_or(Error::MissingQv)?);
    }
    Ok(out)
}

fn master_value(path: &MarketPath, dqv: &[f64], g: &GeneratorFunction, grad: Option<&mut [f64]>) -> f64 {
    let d = path.dim();
    let dd = d * d;
    let np = g.params.len();
    let mut h = vec![0.0; dd];
    let first = path.point(0);
    let last = path.point(path.steps());
    let (g0, gt) = (g.value(first), g.value(last));
    let mut f = gt.ln() - g0.ln();
    match grad {
        None => {
            for t in 0..path.steps() {
                let x = path.point(t);
                g.hessian(x, &mut h);
                let pair: f64 = h.iter().zip(&dqv[t * dd..(t + 1) * dd]).map(|(a, b)| a * b).sum();
                f -= 0.5 * pair / g.value(x);
            }
        }
        Some(out) => {
            let mut dv = vec![0.0; np];
            let mut dh = vec![0.0; np * dd];
            g.value_param_gradient(last, &mut dv);
            for k in 0..np {
                out[k] = dv[k] / gt;
            }
            g.value_param_gradient(first, &mut dv);
            for k in 0..np {
                out[k] -= dv[k] / g0;
            }
            for t in 0..path.steps() {
                let x = path.point(t);
                let q = &dqv[t * dd..(t + 1) * dd];
                let gx = g.value(x);
                g.hessian(x, &mut h);
                let pair: f64 = h.iter().zip(q).map(|(a, b)| a * b).sum();
                f -= 0.5 * pair / gx;
                g.value_param_gradient(x, &mut dv);
                g.hessian_param_gradient(x, &mut dh);
                for k in 0..np {
                    let dpair: f64 = dh[k * dd..(k + 1) * dd].iter().zip(q).map(|(a, b)| a * b).sum();
                    out[k] -= 0.5 * (dpair / gx - pair * dv[k] / (gx * gx));
                }
            }
        }
    }
    f
}

/// Final log-wealth of the portfolio generated by `g`, from the master equation.
pub fn master_log_wealth(path: &MarketPath, g: &GeneratorFunction) -> Result<f64> {
    let dqv = increments(path)?;
    g.check_shape(path.dim())?;
    Ok(master_value(path, &dqv, g, None))
}

/// [`master_log_wealth`] and its gradient in the generator parameters.
pub fn master_log_wealth_gradient(path: &MarketPath, g: &GeneratorFunction, grad: &mut [f64]) -> Result<f64> {
    let dqv = increments(path)?;
    g.check_shape(path.dim())?;
    Ok(master_value(path, &dqv, g, Some(grad)))
}

struct Problem<'a> {
    path: &'a MarketPath,
    dqv: Vec<f64>,
    family: Family,
    bounds: Vec<(f64, f64)>,
    m: f64,
    alpha: f64,
}

impl Problem<'_> {
    fn generator(&self, p: &[f64]) -> GeneratorFunction {
        GeneratorFunction::unchecked(self.family, p.to_vec(), self.m, self.alpha)
    }

    fn admissible(&self, p: &[f64]) -> bool {
        certify_generator(&self.generator(p), self.path.dim(), CERTIFY_GRID).pass
    }

    fn project(&self, p: &mut [f64]) {
        for (v, &(lo, hi)) in p.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Negated objective and gradient (the solver minimizes).
    fn eval(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        let f = master_value(self.path, &self.dqv, &self.generator(p), Some(grad));
        for v in grad.iter_mut() {
            *v = -*v;
        }
        -f
    }

    fn projected_gradient_norm(&self, p: &[f64], g: &[f64]) -> f64 {
        let mut q: Vec<f64> = p.iter().zip(g).map(|(a, b)| a - b).collect();
        self.project(&mut q);
        p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Box-projected BFGS; every accepted iterate passes certification.
    fn solve(&self, start: Vec<f64>) -> (Vec<f64>, f64, usize, f64) {
        let n = start.len();
        let h0: Vec<f64> = self.bounds.iter().map(|(lo, hi)| (hi - lo).max(1e-3).powi(2)).collect();
        let identity = |h: &mut Vec<f64>| {
            h.fill(0.0);
            for i in 0..n {
                h[i * n + i] = h0[i];
            }
        };
        let mut hinv = vec![0.0; n * n];
        identity(&mut hinv);
        let mut x = start;
        let mut g = vec![0.0; n];
        let mut phi = self.eval(&x, &mut g);
        let mut iterations = 0;
        let mut gn = self.projected_gradient_norm(&x, &g);
        while iterations < MAX_ITER && gn > 1e-10 {
            iterations += 1;
            let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>()).collect();
            if dir.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
                identity(&mut hinv);
                dir = (0..n).map(|i| -h0[i] * g[i]).collect();
            }
            let mut accepted = None;
            for attempt in 0..2 {
                let mut t = 1.0;
                while t > 1e-12 {
                    let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                    self.project(&mut xn);
                    let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                    if decrease < 0.0 && self.admissible(&xn) {
                        let mut gnew = vec![0.0; n];
                        let pn = self.eval(&xn, &mut gnew);
                        if pn <= phi + 1e-4 * decrease {
                            accepted = Some((xn, pn, gnew));
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if accepted.is_some() || attempt == 1 {
                    break;
                }
                // fall back to a scaled gradient step
                identity(&mut hinv);
                dir = (0..n).map(|i| -h0[i] * g[i]).collect();
            }
            let Some((xn, pn, gnew)) = accepted else { break };
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-16 {
                let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum()).collect();
                let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    for j in 0..n {
                        hinv[i * n + j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                    }
                }
            } else {
                identity(&mut hinv);
            }
            x = xn;
            phi = pn;
            g = gnew;
            gn = self.projected_gradient_norm(&x, &g);
        }
        (x, -phi, iterations, gn)
    }
}

/// Best functionally generated portfolio over `families`, by master-equation
/// wealth on `path`.
///
/// Each family is searched from its constant default and from random
/// certified points of its parameter box; ties keep the earlier candidate,
/// so a degenerate path returns the first family's default.
pub fn best_generator(path: &MarketPath, m: f64, alpha: f64, families: &[Family]) -> Result<RetroResult> {
    best_generator_with(path, m, alpha, families, &[])
}

/// As [`best_generator`], additionally searching from each warm start whose
/// family is listed (warm starts are clamped into the box and used only if
/// they pass certification).
pub fn best_generator_with(
    path: &MarketPath,
    m: f64,
    alpha: f64,
    families: &[Family],
    warm_starts: &[GeneratorFunction],
) -> Result<RetroResult> {
    let dqv = increments(path)?;
    let d = path.dim();
    let mut best: Option<(Family, Vec<f64>, f64)> = None;
    let mut trace = SolverTrace::default();
    for (fi, &family) in families.iter().enumerate() {
        let problem = Problem {
            path,
            dqv: dqv.clone(),
            family,
            bounds: family.parameter_box(d, m),
            m,
            alpha,
        };
        let mut starts = Vec::with_capacity(STARTS);
        let default = family.default_params(d, m);
        if problem.admissible(&default) {
            starts.push(default);
        }
        for w in warm_starts.iter().filter(|w| w.family == family) {
            let mut p = w.params.clone();
            if p.len() == family.param_count(d) - 1 && family == Family::PowerProduct {
                p.push(0.0);
            }
            if p.len() != problem.bounds.len() {
                continue;
            }
            problem.project(&mut p);
            if problem.admissible(&p) {
                starts.push(p);
            }
        }
        let mut rng = rng::stream(rng::derive_seed(0x6765_6e65, fi as u64), 0);
        let budget = 100 * STARTS;
        let mut tried = 0;
        let mut drawn = 0;
        while drawn + 1 < STARTS && tried < budget {
            tried += 1;
            let p: Vec<f64> = problem
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            if problem.admissible(&p) {
                starts.push(p);
                drawn += 1;
            }
        }
        if starts.is_empty() {
            return Err(Error::RejectionBudgetExceeded { accepted: 0, tried });
        }
        let runs = crate::par::map_indexed(starts.len(), |k| problem.solve(starts[k].clone()));
        trace.starts += runs.len();
        for (p, f, it, gn) in runs {
            trace.iterations += it;
            let better = match &best {
                None => true,
                Some((_, _, bf)) => f > bf + 1e-12,
            };
            if better {
                trace.gradient_norm = gn;
                best = Some((family, p, f));
            }
        }
    }
    let (family, params, _) = best.ok_or_else(|| crate::error::invalid("no generator family given"))?;
    let g = GeneratorFunction::new(family, params, m, alpha, d)?;
    let log_wealth = wealth_master_equation(path, &g)?.final_log();
    Ok(RetroResult {
        map: PortfolioMapSpec::Fg(g),
        log_wealth,
        trace,
    })
}

use crate::error::{invalid, Error, Result};
use crate::linalg::tangent_max_eigenvalue;
use crate::prelude::*;
use crate::simplex::{PortfolioWeights, SimplexLattice, SimplexPoint};
use serde::{Deserialize, Serialize};

/// Closed-form generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `G = Π x_i^{a_i} + c`; params `[a_1, …, a_d]` or `[a_1, …, a_d, c]`.
    PowerProduct,
    /// `G = a - ½ b ‖x‖²`; params `[a, b]`.
    Quadratic,
    /// `G = a + b H(x)` with Shannon entropy `H(x) = -Σ x_i ln x_i`; params `[a, b]`.
    Entropy,
    /// `G = c + s Σ_{i<j} x_i x_j + Σ b_i x_i`; params `[c, s]` or `[c, s, b_1, …, b_d]`.
    AffineMixture,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::PowerProduct,
        Family::Quadratic,
        Family::Entropy,
        Family::AffineMixture,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::PowerProduct => "power_product",
            Family::Quadratic => "quadratic",
            Family::Entropy => "entropy",
            Family::AffineMixture => "affine_mixture",
        }
    }

    /// Number of free parameters used by the optimizers and samplers.
    pub fn param_count(&self, d: usize) -> usize {
        match self {
            Family::PowerProduct => d + 1,
            Family::Quadratic | Family::Entropy => 2,
            Family::AffineMixture => 2 + d,
        }
    }

    /// Box of admissible parameters for bound `M`: every point has `G ≥ 1/M`
    /// on the simplex. Concavity still has to be certified for power products.
    pub fn parameter_box(&self, d: usize, m: f64) -> Vec<(f64, f64)> {
        let floor = 1.0 / m;
        let top = floor.max(1.0);
        match self {
            Family::PowerProduct => {
                let mut b = vec![(0.0, 1.0); d];
                b.push((floor, top));
                b
            }
            // floor f = a - b/2 is the minimum over the simplex
            Family::Quadratic => vec![(floor + 0.0, top + 0.5 * m), (0.0, m)],
            Family::Entropy => vec![(floor, top), (0.0, 1.0)],
            Family::AffineMixture => {
                let mut b = vec![(floor, top), (0.0, m)];
                b.extend(core::iter::repeat((0.0, 1.0)).take(d));
                b
            }
        }
    }

    /// Parameters giving a constant generator (the market portfolio).
    pub fn default_params(&self, d: usize, m: f64) -> Vec<f64> {
        let c = (1.0 / m).max(1.0);
        match self {
            Family::PowerProduct => {
                let mut p = vec![0.0; d];
                p.push(c);
                p
            }
            Family::Quadratic | Family::Entropy => vec![c, 0.0],
            Family::AffineMixture => {
                let mut p = vec![c, 0.0];
                p.extend(core::iter::repeat(0.0).take(d));
                p
            }
        }
    }
}

/// A concave generating function with a declared bound `M` (`G ≥ 1/M`,
/// `‖G‖_{C²} ≤ M`) and Hölder exponent `α` used by the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFunction {
    pub family: Family,
    pub params: Vec<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    pub alpha: f64,
}

impl GeneratorFunction {
    /// Builds a generator; fails if the parameter count is wrong or `G < 1/M`
    /// somewhere on the closed simplex lattice of resolution 64.
    pub fn new(family: Family, params: Vec<f64>, m: f64, alpha: f64, d: usize) -> Result<Self> {
        let g = Self::unchecked(family, params, m, alpha);
        g.check_shape(d)?;
        let floor = g.floor_on_lattice(d, 64);
        if floor < 1.0 / m - 1e-12 {
            return Err(invalid("generator dips below 1/M"));
        }
        Ok(g)
    }

    pub(crate) fn unchecked(family: Family, params: Vec<f64>, m: f64, alpha: f64) -> Self {
        Self {
            family,
            params,
            m,
            alpha,
        }
    }

    /// `G ≡ 1`, which generates the market portfolio.
    pub fn constant() -> Self {
        Self::unchecked(Family::AffineMixture, vec![1.0, 0.0], 1.0, 1.0)
    }

    /// `G = Π x_i^{a_i}`.
    pub fn power_product(exponents: &[f64], m: f64) -> Self {
        Self::unchecked(Family::PowerProduct, exponents.to_vec(), m, 1.0 / m)
    }

    /// Checks that `params` fits the family in dimension `d`.
    pub fn check_shape(&self, d: usize) -> Result<()> {
        let n = self.params.len();
        let ok = match self.family {
            Family::PowerProduct => n == d || n == d + 1,
            Family::Quadratic | Family::Entropy => n == 2,
            Family::AffineMixture => n == 2 || n == 2 + d,
        };
        if !ok || self.params.iter().any(|p| !p.is_finite()) || !(self.m > 0.0) {
            return Err(invalid("generator parameters do not fit the family"));
        }
        Ok(())
    }

    fn shift(&self, d: usize) -> f64 {
        if self.params.len() > d {
            self.params[d]
        } else {
            0.0
        }
    }

    fn linear(&self, i: usize) -> f64 {
        self.params.get(2 + i).copied().unwrap_or(0.0)
    }

    /// `G(x)`; defined on the closed simplex.
    pub fn value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let p = &self.params;
        match self.family {
            Family::PowerProduct => product(x, &p[..d]) + self.shift(d),
            Family::Quadratic => p[0] - 0.5 * p[1] * x.iter().map(|v| v * v).sum::<f64>(),
            Family::Entropy => p[0] + p[1] * entropy(x),
            Family::AffineMixture => {
                let s: f64 = x.iter().sum();
                let sq: f64 = x.iter().map(|v| v * v).sum();
                let lin: f64 = (0..d).map(|i| self.linear(i) * x[i]).sum();
                p[0] + p[1] * 0.5 * (s * s - sq) + lin
            }
        }
    }

    /// `∇G(x)`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let p = &self.params;
        match self.family {
            Family::PowerProduct => {
                let prod = product(x, &p[..d]);
                for i in 0..d {
                    out[i] = if p[i] == 0.0 { 0.0 } else { p[i] * prod / x[i] };
                }
            }
            Family::Quadratic => {
                for i in 0..d {
                    out[i] = -p[1] * x[i];
                }
            }
            Family::Entropy => {
                for i in 0..d {
                    out[i] = -p[1] * (x[i].ln() + 1.0);
                }
            }
            Family::AffineMixture => {
                let s: f64 = x.iter().sum();
                for i in 0..d {
                    out[i] = p[1] * (s - x[i]) + self.linear(i);
                }
            }
        }
    }

    /// `∇G(x) / G(x)`, evaluated so that power products stay exact near the boundary.
    pub fn log_gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        if self.family == Family::PowerProduct {
            let a = &self.params[..d];
            let prod = product(x, a);
            let ratio = prod / (prod + self.shift(d));
            for i in 0..d {
                out[i] = if a[i] == 0.0 {
                    0.0
                } else {
                    a[i] / x[i] * ratio
                };
            }
            return;
        }
        self.gradient(x, out);
        let g = self.value(x);
        for v in out.iter_mut() {
            *v /= g;
        }
    }

    /// Row-major Hessian `D²G(x)`.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let p = &self.params;
        out.fill(0.0);
        match self.family {
            Family::PowerProduct => {
                let prod = product(x, &p[..d]);
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { p[i] } else { 0.0 };
                        out[i * d + j] = prod * (p[i] * p[j] - delta) / (x[i] * x[j]);
                    }
                }
            }
            Family::Quadratic => {
                for i in 0..d {
                    out[i * d + i] = -p[1];
                }
            }
            Family::Entropy => {
                for i in 0..d {
                    out[i * d + i] = -p[1] / x[i];
                }
            }
            Family::AffineMixture => {
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            out[i * d + j] = p[1];
                        }
                    }
                }
            }
        }
    }

    /// `∂G/∂params` at `x`.
    pub fn value_param_gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let p = &self.params;
        out.fill(0.0);
        match self.family {
            Family::PowerProduct => {
                let prod = product(x, &p[..d]);
                for k in 0..d {
                    out[k] = prod * x[k].ln();
                }
                if p.len() > d {
                    out[d] = 1.0;
                }
            }
            Family::Quadratic => {
                out[0] = 1.0;
                out[1] = -0.5 * x.iter().map(|v| v * v).sum::<f64>();
            }
            Family::Entropy => {
                out[0] = 1.0;
                out[1] = entropy(x);
            }
            Family::AffineMixture => {
                let s: f64 = x.iter().sum();
                let sq: f64 = x.iter().map(|v| v * v).sum();
                out[0] = 1.0;
                out[1] = 0.5 * (s * s - sq);
                let n = p.len() - 2;
                out[2..2 + n].copy_from_slice(&x[..n]);
            }
        }
    }

    /// `∂(D²G)/∂params` at `x`, as `params.len()` row-major `d × d` blocks.
    pub fn hessian_param_gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let dd = d * d;
        let p = &self.params;
        out.fill(0.0);
        match self.family {
            Family::PowerProduct => {
                let prod = product(x, &p[..d]);
                for k in 0..d {
                    let lk = x[k].ln();
                    let block = &mut out[k * dd..(k + 1) * dd];
                    for i in 0..d {
                        for j in 0..d {
                            let delta = if i == j { p[i] } else { 0.0 };
                            let core = p[i] * p[j] - delta;
                            let mut dcore = 0.0;
                            if i == k {
                                dcore += p[j];
                            }
                            if j == k {
                                dcore += p[i];
                            }
                            if i == j && i == k {
                                dcore -= 1.0;
                            }
                            block[i * d + j] = prod * (lk * core + dcore) / (x[i] * x[j]);
                        }
                    }
                }
            }
            Family::Quadratic => {
                for i in 0..d {
                    out[dd + i * d + i] = -1.0;
                }
            }
            Family::Entropy => {
                for i in 0..d {
                    out[dd + i * d + i] = -1.0 / x[i];
                }
            }
            Family::AffineMixture => {
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            out[dd + i * d + j] = 1.0;
                        }
                    }
                }
            }
        }
    }

    fn floor_on_lattice(&self, d: usize, n: usize) -> f64 {
        let lat = SimplexLattice::new(d, n);
        (0..lat.len())
            .map(|i| self.value(&lat.point(i)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn product(x: &[f64], a: &[f64]) -> f64 {
    x.iter()
        .zip(a)
        .map(|(xi, ai)| if *ai == 0.0 { 1.0 } else { xi.powf(*ai) })
        .product()
}

fn entropy(x: &[f64]) -> f64 {
    -x.iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>()
}

/// Writes `π^G(x)_i = x_i (g_i + 1 - Σ_j x_j g_j)` with `g = ∇G/G` into `out`.
///
/// Tiny negative values (above `-1e-10`) are clamped to zero; anything lower
/// signals a generator outside the concave class.
pub fn fg_weights_into(g: &GeneratorFunction, x: &[f64], out: &mut [f64]) -> Result<()> {
    g.log_gradient(x, out);
    let mean: f64 = x.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
    let mut clamped = false;
    for i in 0..x.len() {
        let w = x[i] * (out[i] + 1.0 - mean);
        if !w.is_finite() || w < -1e-10 {
            return Err(Error::NegativeWeight { index: i, value: w });
        }
        if w < 0.0 {
            clamped = true;
        }
        out[i] = w.max(0.0);
    }
    if clamped {
        let s: f64 = out.iter().sum();
        for v in out.iter_mut() {
            *v /= s;
        }
    }
    Ok(())
}

/// Functionally generated weights `π^G(x)`.
pub fn fg_weights(g: &GeneratorFunction, x: &SimplexPoint) -> Result<PortfolioWeights> {
    let mut out = vec![0.0; x.dim()];
    g.check_shape(x.dim())?;
    fg_weights_into(g, x.coords(), &mut out)?;
    PortfolioWeights::long_only(out, 0.0)
}

/// Outcome of a generator audit on a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCertificate {
    /// Largest of `sup|G|`, `sup|∂_i G|`, `sup|∂_ij G|` over interior lattice points.
    pub m_value: f64,
    /// Largest eigenvalue of the Hessian restricted to `{Σ v = 0}` (orthonormal basis).
    pub concavity_margin: f64,
    /// Minimum of `G` over the closed lattice.
    pub floor: f64,
    /// `concavity_margin ≤ 1e-8` and `floor ≥ 1/M`.
    pub pass: bool,
    /// `m_value ≤ M`.
    pub within_bound: bool,
}

/// Audits `G` on the simplex lattice of resolution `grid_n`.
///
/// Values are checked on the closed lattice, derivatives and concavity on
/// its interior points.
pub fn certify_generator(g: &GeneratorFunction, d: usize, grid_n: usize) -> GeneratorCertificate {
    let lat = SimplexLattice::new(d, grid_n.max(d + 1));
    let mut floor = f64::INFINITY;
    let mut sup: f64 = 0.0;
    let mut margin = f64::NEG_INFINITY;
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    for i in 0..lat.len() {
        let x = lat.point(i);
        let v = g.value(&x);
        floor = floor.min(v);
        sup = sup.max(v.abs());
        if x.contains(&0.0) {
            continue;
        }
        g.gradient(&x, &mut grad);
        g.hessian(&x, &mut hess);
        sup = grad
            .iter()
            .chain(hess.iter())
            .fold(sup, |m, v| m.max(v.abs()));
        margin = margin.max(tangent_max_eigenvalue(&hess, d));
    }
    if margin == f64::NEG_INFINITY {
        margin = 0.0;
    }
    // a constant generator has an exactly zero Hessian; report 0 rather than -0
    let margin = if margin == 0.0 { 0.0 } else { margin };
    GeneratorCertificate {
        m_value: sup,
        concavity_margin: margin,
        floor,
        pass: margin <= 1e-8 && floor >= 1.0 / g.m,
        within_bound: sup <= g.m,
    }
}

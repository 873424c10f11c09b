use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::simplex::{project_onto_simplex, Cell, SimplexLattice};
use serde::{Deserialize, Serialize};

/// A Lipschitz portfolio map given by barycentric interpolation of node
/// values on the simplex lattice of resolution `K` (spacing `h = 1/K`).
///
/// Node values are long-only with every coordinate at least `margin/d`;
/// `M` is the certified ℓ₁ → ℓ₁ Lipschitz constant bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGridMap {
    pub dim: usize,
    pub resolution: usize,
    pub values: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: f64,
    pub margin: f64,
}

impl LipschitzGridMap {
    /// Validates shapes, margins and the Lipschitz bound.
    pub fn new(
        dim: usize,
        resolution: usize,
        values: Vec<Vec<f64>>,
        m: f64,
        margin: f64,
    ) -> Result<Self> {
        let map = Self {
            dim,
            resolution,
            values,
            m,
            margin,
        };
        map.validate()?;
        Ok(map)
    }

    /// Every node set to `w`.
    pub fn constant(dim: usize, resolution: usize, w: &[f64], m: f64, margin: f64) -> Result<Self> {
        let n = SimplexLattice::new(dim, resolution).len();
        Self::new(dim, resolution, vec![w.to_vec(); n], m, margin)
    }

    pub fn lattice(&self) -> SimplexLattice {
        SimplexLattice::new(self.dim, self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::DimensionTooSmall(self.dim));
        }
        if self.resolution == 0 || !(0.0..=1.0).contains(&self.margin) || !(self.m >= 0.0) {
            return Err(invalid("bad Lipschitz grid parameters"));
        }
        let lat = self.lattice();
        if self.values.len() != lat.len() {
            return Err(invalid("one value per lattice node is required"));
        }
        let floor = self.margin / self.dim as f64;
        for v in &self.values {
            check_weights(v, self.dim, floor)?;
        }
        let cert = certify_lipschitz(self);
        if cert > self.m * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::CertificationFailed {
                certified: cert,
                bound: self.m,
            });
        }
        Ok(())
    }

    /// Interpolated weights at `x`.
    pub fn weights_into(&self, x: &[f64], out: &mut [f64]) {
        let cell = self.lattice().locate(x);
        self.weights_at_cell(&cell, out);
    }

    /// Interpolated weights in a known cell.
    pub fn weights_at_cell(&self, cell: &Cell, out: &mut [f64]) {
        out.fill(0.0);
        for (&n, &w) in cell.nodes.iter().zip(&cell.weights) {
            for (o, v) in out.iter_mut().zip(&self.values[n]) {
                *o += w * v;
            }
        }
    }
}

pub(crate) fn check_weights(v: &[f64], d: usize, floor: f64) -> Result<()> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > crate::simplex::SUM_TOLERANCE {
        return Err(invalid("node values must sum to one"));
    }
    for (index, &value) in v.iter().enumerate() {
        if !(value >= floor - 1e-15) {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    Ok(())
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Largest ℓ₁ → ℓ₁ Lipschitz constant of the interpolant over all lattice cells.
///
/// Inside a Kuhn cell the interpolant is affine; its operator norm on the
/// tangent space is attained on a direction `e_i - e_j`, whose image is a
/// sum of consecutive edge differences. For `d ≤ 3` this equals the largest
/// ratio `‖v_u - v_w‖₁ / ‖u - w‖₁` over neighbouring nodes.
pub fn certify_lipschitz(map: &LipschitzGridMap) -> f64 {
    lattice_lipschitz(&map.lattice(), &map.values)
}

/// Exact ℓ₁ Lipschitz constant of the piecewise-linear interpolant of `values`.
pub fn lattice_lipschitz(lat: &SimplexLattice, values: &[Vec<f64>]) -> f64 {
    let d = lat.dim();
    let scale = lat.resolution() as f64 / 2.0;
    let mut best: f64 = 0.0;
    let mut diffs = vec![vec![0.0; d]; d - 1];
    let mut acc = vec![0.0; d];
    for (chain, sigma) in lat.cells() {
        // diffs[k] is the value change when cumulative coordinate k moves by one
        for (m, &k) in sigma.iter().enumerate() {
            for (c, (a, b)) in diffs[k]
                .iter_mut()
                .zip(values[chain[m + 1]].iter().zip(&values[chain[m]]))
            {
                *c = a - b;
            }
        }
        for i in 0..d - 1 {
            acc.fill(0.0);
            for row in diffs.iter().skip(i) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
                best = best.max(acc.iter().map(|v| v.abs()).sum::<f64>() * scale);
            }
        }
    }
    best
}

/// Pushes node values into the class `{margin/d floor, Lipschitz ≤ M}`.
///
/// Runs `sweeps` rounds of Dykstra projections onto the per-node floor
/// simplices and the neighbour-pair ℓ₁ caps, then restores exact
/// feasibility by pairwise shrinking and, if still needed, by contracting
/// all nodes toward their mean.
pub fn project_into_class(
    lat: &SimplexLattice,
    values: &[Vec<f64>],
    m: f64,
    margin: f64,
    sweeps: usize,
) -> Vec<Vec<f64>> {
    let d = lat.dim();
    let floor = margin / d as f64;
    let cap = m * lat.neighbor_distance();
    let pairs = lat.neighbor_pairs();
    let mut x: Vec<Vec<f64>> = values.to_vec();
    let n = x.len();
    // Dykstra correction terms: one per node set and one per pair set
    let mut p_node = vec![vec![0.0; d]; n];
    let mut p_pair = vec![(vec![0.0; d], vec![0.0; d]); pairs.len()];
    for _ in 0..sweeps {
        for (i, xi) in x.iter_mut().enumerate() {
            let y: Vec<f64> = xi.iter().zip(&p_node[i]).map(|(a, b)| a + b).collect();
            let proj = project_onto_simplex(&y, floor);
            for k in 0..d {
                p_node[i][k] = y[k] - proj[k];
            }
            *xi = proj;
        }
        for (q, &(u, w)) in pairs.iter().enumerate() {
            let yu: Vec<f64> = x[u].iter().zip(&p_pair[q].0).map(|(a, b)| a + b).collect();
            let yw: Vec<f64> = x[w].iter().zip(&p_pair[q].1).map(|(a, b)| a + b).collect();
            let (pu, pw) = project_pair(&yu, &yw, cap);
            for k in 0..d {
                p_pair[q].0[k] = yu[k] - pu[k];
                p_pair[q].1[k] = yw[k] - pw[k];
            }
            x[u] = pu;
            x[w] = pw;
        }
    }
    repair(lat, x, m, floor)
}

/// Exact feasibility: node floors, then pairwise shrinking, then contraction.
pub(crate) fn repair(
    lat: &SimplexLattice,
    mut x: Vec<Vec<f64>>,
    m: f64,
    floor: f64,
) -> Vec<Vec<f64>> {
    let target = m * (1.0 - 1e-10);
    let cap = target * lat.neighbor_distance();
    for xi in x.iter_mut() {
        *xi = project_onto_simplex(xi, floor);
    }
    let pairs = lat.neighbor_pairs();
    for _ in 0..200 {
        let mut worst: f64 = 0.0;
        for &(u, w) in &pairs {
            let dist = l1(&x[u], &x[w]);
            if dist > cap {
                worst = worst.max(dist / cap.max(f64::MIN_POSITIVE));
                let t = cap / dist;
                let (a, b) = (x[u].clone(), x[w].clone());
                for k in 0..a.len() {
                    let mid = 0.5 * (a[k] + b[k]);
                    x[u][k] = mid + 0.5 * t * (a[k] - b[k]);
                    x[w][k] = mid - 0.5 * t * (a[k] - b[k]);
                }
            }
        }
        if worst <= 1.0 {
            break;
        }
    }
    let cert = lattice_lipschitz(lat, &x);
    if cert > target {
        let n = x.len() as f64;
        let d = x[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|k| x.iter().map(|v| v[k]).sum::<f64>() / n)
            .collect();
        let t = if cert > 0.0 { target / cert } else { 0.0 };
        for xi in x.iter_mut() {
            for k in 0..d {
                xi[k] = mean[k] + t * (xi[k] - mean[k]);
            }
        }
    }
    for xi in x.iter_mut() {
        let s: f64 = xi.iter().sum();
        for v in xi.iter_mut() {
            *v /= s;
        }
    }
    x
}

/// Euclidean projection of `(a, b)` onto `{‖a - b‖₁ ≤ r}`: the midpoint is
/// kept and the half-difference is projected onto the ℓ₁ ball of radius `r/2`.
fn project_pair(a: &[f64], b: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
    let half: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x - y)).collect();
    if half.iter().map(|v| v.abs()).sum::<f64>() * 2.0 <= r {
        return (a.to_vec(), b.to_vec());
    }
    let p = project_l1_ball(&half, 0.5 * r);
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    (
        mid.iter().zip(&p).map(|(m, h)| m + h).collect(),
        mid.iter().zip(&p).map(|(m, h)| m - h).collect(),
    )
}

fn project_l1_ball(v: &[f64], r: f64) -> Vec<f64> {
    if r <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in u.iter().enumerate() {
        cum += s;
        let t = (cum - r) / (k + 1) as f64;
        if s > t {
            theta = t;
        }
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

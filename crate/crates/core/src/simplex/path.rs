use super::point::{SimplexPoint, SUM_TOLERANCE};
use crate::error::{invalid, Error, Result};
use crate::prelude::*;

/// How a path was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Integer times `0, 1, …, T`.
    Discrete,
    /// Grid samples of a continuous-time trajectory.
    SampledContinuous,
}

/// A trajectory of market weights, optionally with cumulative quadratic variation.
///
/// Points and QV matrices are stored flat: point `i` is
/// `points[i*d..(i+1)*d]`, QV matrix `i` is the row-major block
/// `qv[i*d*d..(i+1)*d*d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    kind: PathKind,
    dim: usize,
    times: Vec<f64>,
    points: Vec<f64>,
    qv: Option<Vec<f64>>,
    partition_level: Option<u32>,
}

impl MarketPath {
    /// Builds a path from flat point storage, checking every invariant.
    pub fn new(kind: PathKind, dim: usize, times: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if times.is_empty() || points.len() != times.len() * dim {
            return Err(invalid("points and times disagree in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times must be strictly increasing"));
        }
        for (step, p) in points.chunks(dim).enumerate() {
            let s: f64 = p.iter().sum();
            if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::KernelProducedInvalidPoint { step });
            }
        }
        Ok(Self::from_parts(kind, dim, times, points))
    }

    pub(crate) fn from_parts(
        kind: PathKind,
        dim: usize,
        times: Vec<f64>,
        points: Vec<f64>,
    ) -> Self {
        Self {
            kind,
            dim,
            times,
            points,
            qv: None,
            partition_level: None,
        }
    }

    /// Discrete path with times `0, 1, …`.
    pub fn discrete(points: &[SimplexPoint]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.dim());
        if points.iter().any(|p| p.dim() != dim) {
            return Err(invalid("points have different dimensions"));
        }
        let times = (0..points.len()).map(|t| t as f64).collect();
        let flat = points
            .iter()
            .flat_map(|p| p.coords().iter().copied())
            .collect();
        Self::new(PathKind::Discrete, dim, times, flat)
    }

    /// Discrete path from raw rows, each normalized onto the simplex.
    pub fn discrete_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let pts = rows
            .iter()
            .map(|r| SimplexPoint::new(r))
            .collect::<Result<Vec<_>>>()?;
        Self::discrete(&pts)
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of increments, `len - 1`.
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    pub fn has_qv(&self) -> bool {
        self.qv.is_some()
    }

    pub fn partition_level(&self) -> Option<u32> {
        self.partition_level
    }

    /// Cumulative QV matrix at point `i`.
    pub fn qv(&self, i: usize) -> Option<&[f64]> {
        let dd = self.dim * self.dim;
        self.qv.as_ref().map(|q| &q[i * dd..(i + 1) * dd])
    }

    /// QV increment over step `i → i + 1`.
    pub fn qv_increment(&self, i: usize) -> Option<Vec<f64>> {
        let a = self.qv(i)?;
        let b = self.qv(i + 1)?;
        Some(b.iter().zip(a).map(|(x, y)| x - y).collect())
    }

    /// Ratios `μ_{i+1} / μ_i`, coordinatewise.
    pub fn ratio(&self, i: usize) -> Vec<f64> {
        self.point(i + 1)
            .iter()
            .zip(self.point(i))
            .map(|(a, b)| a / b)
            .collect()
    }

    /// Smallest and largest one-step ratio over the whole path.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.steps() {
            for r in self.ratio(i) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    /// The first `n + 1` points.
    pub fn prefix(&self, n: usize) -> Self {
        let m = (n + 1).min(self.len());
        let dd = self.dim * self.dim;
        Self {
            kind: self.kind,
            dim: self.dim,
            times: self.times[..m].to_vec(),
            points: self.points[..m * self.dim].to_vec(),
            qv: self.qv.as_ref().map(|q| q[..m * dd].to_vec()),
            partition_level: self.partition_level,
        }
    }
}

/// Dyadic refining partitions: level `n` has mesh `h₀ 2⁻ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefiningPartition {
    pub base_mesh: f64,
    pub level: u32,
}

impl RefiningPartition {
    pub fn new(base_mesh: f64, level: u32) -> Result<Self> {
        if !(base_mesh > 0.0) || !base_mesh.is_finite() {
            return Err(invalid("base mesh must be positive"));
        }
        Ok(Self { base_mesh, level })
    }

    pub fn mesh(&self) -> f64 {
        self.base_mesh / (1u64 << self.level) as f64
    }

    pub fn refine(&self) -> Self {
        Self {
            base_mesh: self.base_mesh,
            level: self.level + 1,
        }
    }
}

/// Restricts `path` to the points of `partition` and fills the cumulative QV
/// `Σ (Δμ)(Δμ)ᵀ` along consecutive partition points.
///
/// Partition points are `t₀ + k h` up to the last path time; each must match a
/// path time to within `1e-9 h`.
pub fn quadratic_variation(path: &MarketPath, partition: &RefiningPartition) -> Result<MarketPath> {
    if path.has_qv() {
        return Err(invalid("path already carries quadratic variation"));
    }
    let h = partition.mesh();
    let tol = 1e-9 * h;
    let t0 = path.times[0];
    let t_end = path.times[path.len() - 1];
    let count = ((t_end - t0 + tol) / h).floor() as usize + 1;
    let mut indices = Vec::with_capacity(count);
    let mut cursor = 0;
    for k in 0..count {
        let s = t0 + k as f64 * h;
        let pos = path.times[cursor..].partition_point(|&t| t < s - tol) + cursor;
        if pos >= path.len() || (path.times[pos] - s).abs() > tol {
            return Err(Error::PartitionCoarserThanPath);
        }
        indices.push(pos);
        cursor = pos;
    }
    let d = path.dim;
    let dd = d * d;
    let mut times = Vec::with_capacity(indices.len());
    let mut points = Vec::with_capacity(indices.len() * d);
    let mut qv = vec![0.0; indices.len() * dd];
    for (n, &i) in indices.iter().enumerate() {
        times.push(path.times[i]);
        points.extend_from_slice(path.point(i));
        if n > 0 {
            let prev = path.point(indices[n - 1]);
            let cur = path.point(i);
            let (head, tail) = qv.split_at_mut(n * dd);
            let last = &head[(n - 1) * dd..];
            let next = &mut tail[..dd];
            for a in 0..d {
                let da = cur[a] - prev[a];
                for b in 0..d {
                    next[a * d + b] = last[a * d + b] + da * (cur[b] - prev[b]);
                }
            }
        }
    }
    Ok(MarketPath {
        kind: path.kind,
        dim: d,
        times,
        points,
        qv: Some(qv),
        partition_level: Some(partition.level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(rows: &[[f64; 2]]) -> MarketPath {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        MarketPath::discrete_from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_path_has_zero_qv() {
        let p = path(&[[0.3, 0.7]; 6]);
        let q = quadratic_variation(&p, &RefiningPartition::new(1.0, 0).unwrap()).unwrap();
        assert!(q.qv(5).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_summed_increments() {
        let p = path(&[[0.5, 0.5], [0.6, 0.4], [0.5, 0.5]]);
        let q = quadratic_variation(&p, &RefiningPartition::new(1.0, 0).unwrap()).unwrap();
        let end = q.qv(2).unwrap();
        assert!((end[0] - 0.02).abs() < 1e-15);
        assert!((end[1] + 0.02).abs() < 1e-15);
        assert!((end[3] - 0.02).abs() < 1e-15);
        assert_eq!(q.qv(0).unwrap(), &[0.0; 4]);
    }

    #[test]
    fn coarse_partition_subsamples() {
        let p = path(&[[0.5, 0.5], [0.6, 0.4], [0.5, 0.5], [0.4, 0.6], [0.5, 0.5]]);
        let q = quadratic_variation(&p, &RefiningPartition::new(2.0, 0).unwrap()).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.qv(2).unwrap(), &[0.0; 4]);
        let fine = quadratic_variation(&p, &RefiningPartition::new(2.0, 1).unwrap()).unwrap();
        assert_eq!(fine.len(), 5);
        assert_eq!(fine.partition_level(), Some(1));
    }

    #[test]
    fn partition_finer_than_path_is_rejected() {
        let p = path(&[[0.5, 0.5], [0.6, 0.4], [0.5, 0.5]]);
        let r = quadratic_variation(&p, &RefiningPartition::new(1.0, 1).unwrap());
        assert_eq!(r, Err(Error::PartitionCoarserThanPath));
    }

    #[test]
    fn invalid_paths_are_rejected() {
        assert!(MarketPath::new(
            PathKind::Discrete,
            2,
            vec![0.0, 1.0],
            vec![0.5, 0.5, 1.0, 0.0]
        )
        .is_err());
        assert!(MarketPath::new(
            PathKind::Discrete,
            2,
            vec![0.0, 0.0],
            vec![0.5, 0.5, 0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn ratio_bounds_of_alternating_path() {
        let p = path(&[[0.5, 0.5], [2.0 / 3.0, 1.0 / 3.0], [0.5, 0.5]]);
        let (lo, hi) = p.ratio_bounds();
        assert!((lo - 2.0 / 3.0).abs() < 1e-15 && (hi - 1.5).abs() < 1e-15);
    }
}

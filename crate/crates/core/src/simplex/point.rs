use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use serde::{Deserialize, Serialize};

/// Maximum tolerated `|Σ coords - 1|` for points and weights.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A point of the open simplex: strictly positive coordinates summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    /// Normalizes `raw` by its sum.
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::DimensionTooSmall(raw.len()));
        }
        for (index, &value) in raw.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveEntry { index, value });
            }
        }
        let total: f64 = raw.iter().sum();
        Ok(Self {
            coords: raw.iter().map(|v| v / total).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.coords
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// `s ↦ s / Σ s`.
pub fn make_simplex_point(raw: &[f64]) -> Result<SimplexPoint> {
    SimplexPoint::new(raw)
}

/// The barycenter `(1/d, …, 1/d)`.
pub fn uniform(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

/// Portfolio weights summing to one.
///
/// Long-only weights with margin `ε` have every coordinate at least `ε/d`.
/// Weights that are not long-only live on the hyperplane `Σ w = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    coords: Vec<f64>,
    long_only: bool,
    margin: f64,
}

impl PortfolioWeights {
    /// Long-only weights; fails if a coordinate is below `margin/d` or the sum is off.
    pub fn long_only(coords: Vec<f64>, margin: f64) -> Result<Self> {
        let d = coords.len();
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        if !(0.0..=1.0).contains(&margin) {
            return Err(invalid("margin must lie in [0, 1]"));
        }
        check_sum(&coords)?;
        let floor = margin / d as f64;
        for (index, &value) in coords.iter().enumerate() {
            if !(value >= floor) {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        Ok(Self {
            coords,
            long_only: true,
            margin,
        })
    }

    /// Weights on the hyperplane `Σ w = 1`; flagged long-only when all coordinates are ≥ 0.
    pub fn on_hyperplane(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        check_sum(&coords)?;
        let long_only = coords.iter().all(|&w| w >= 0.0);
        Ok(Self {
            coords,
            long_only,
            margin: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_long_only(&self) -> bool {
        self.long_only
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }
}

impl AsRef<[f64]> for PortfolioWeights {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

fn check_sum(coords: &[f64]) -> Result<()> {
    let s: f64 = coords.iter().sum();
    if !s.is_finite() || (s - 1.0).abs() > SUM_TOLERANCE {
        return Err(invalid("weights must sum to one"));
    }
    Ok(())
}

/// `(1 - ε) w + ε (1/d, …, 1/d)`; every output coordinate is at least `ε/d`.
pub fn project_to_margin(w: &PortfolioWeights, eps: f64) -> Result<PortfolioWeights> {
    if !w.is_long_only() {
        return Err(invalid("margin blending needs long-only weights"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid("margin must lie in [0, 1]"));
    }
    Ok(PortfolioWeights {
        coords: blend_uniform(w.coords(), eps),
        long_only: true,
        margin: eps,
    })
}

pub(crate) fn blend_uniform(w: &[f64], eps: f64) -> Vec<f64> {
    let floor = eps / w.len() as f64;
    w.iter()
        .map(|&v| (1.0 - eps) * v.max(0.0) + floor)
        .collect()
}

/// Euclidean projection of `v` onto `{w : w_i ≥ floor, Σ w = 1}` (sort-based).
pub fn project_onto_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let d = v.len();
    let budget = 1.0 - floor * d as f64;
    let mut sorted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - budget) / (k + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    let mut out: Vec<f64> = v
        .iter()
        .map(|x| (x - floor - tau).max(0.0) + floor)
        .collect();
    // absorb rounding so the sum is one to machine precision
    let s: f64 = out.iter().sum();
    if let Some((i, _)) = out.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        out[i] += 1.0 - s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn normalizes_raw_capitalizations() {
        assert_eq!(
            make_simplex_point(&[1.0, 1.0]).unwrap().coords(),
            &[0.5, 0.5]
        );
        let p = make_simplex_point(&[1.0, 0.5]).unwrap();
        assert!(close(p.coords(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        let p = make_simplex_point(&[3.0, 1.0, 1.0]).unwrap();
        assert!(close(p.coords(), &[0.6, 0.2, 0.2], 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            make_simplex_point(&[1.0, 0.0]),
            Err(Error::NonPositiveEntry {
                index: 1,
                value: 0.0
            })
        );
        assert_eq!(make_simplex_point(&[1.0]), Err(Error::DimensionTooSmall(1)));
        assert!(make_simplex_point(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn margin_blend_examples() {
        let w = PortfolioWeights::long_only(vec![1.0, 0.0], 0.0).unwrap();
        let p = project_to_margin(&w, 0.1).unwrap();
        assert!(close(p.coords(), &[0.95, 0.05], 1e-15));
        let w = PortfolioWeights::long_only(vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(project_to_margin(&w, 0.37).unwrap().coords(), &[0.5, 0.5]);
        let w = PortfolioWeights::long_only(vec![0.7, 0.2, 0.1], 0.0).unwrap();
        let p = project_to_margin(&w, 0.3).unwrap();
        assert!(close(p.coords(), &[0.59, 0.24, 0.17], 1e-15));
        assert!(p.coords().iter().all(|&v| v >= 0.1));
    }

    #[test]
    fn margin_blend_rejects_short_weights() {
        let w = PortfolioWeights::on_hyperplane(vec![1.5, -0.5]).unwrap();
        assert!(!w.is_long_only());
        assert!(project_to_margin(&w, 0.1).is_err());
    }

    #[test]
    fn euclidean_projection() {
        let p = project_onto_simplex(&[0.9, 0.9, -0.3], 0.0);
        assert!(close(&p, &[0.5, 0.5, 0.0], 1e-15));
        let p = project_onto_simplex(&[1.0, 0.0], 0.2);
        assert!(close(&p, &[0.8, 0.2], 1e-15));
        let p = project_onto_simplex(&[0.2, 0.3, 0.5], 0.0);
        assert!(close(&p, &[0.2, 0.3, 0.5], 1e-15));
    }
}

use super::generator::{fg_weights_into, GeneratorFunction};
use super::lipschitz::LipschitzGridMap;
use super::table::TableMap;
use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::simplex::{PortfolioWeights, SimplexPoint};
use serde::{Deserialize, Serialize};

/// A constant-rebalanced portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantMap {
    pub weights: Vec<f64>,
}

/// A portfolio map `π: Δ → Δ̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PortfolioMapSpec {
    Constant(ConstantMap),
    Lipschitz(LipschitzGridMap),
    Fg(GeneratorFunction),
    Table(TableMap),
}

impl PortfolioMapSpec {
    /// Constant weights `b`.
    pub fn constant(b: &[f64]) -> Result<Self> {
        PortfolioWeights::long_only(b.to_vec(), 0.0)?;
        Ok(Self::Constant(ConstantMap {
            weights: b.to_vec(),
        }))
    }

    /// The market portfolio `π(x) = x`, generated by `G ≡ 1`.
    pub fn market() -> Self {
        Self::Fg(GeneratorFunction::constant())
    }

    /// Short label for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Constant(_) => "constant",
            Self::Lipschitz(_) => "lipschitz",
            Self::Fg(_) => "fg",
            Self::Table(_) => "table",
        }
    }

    /// Dimension fixed by the map, if any (generators adapt to any `d`).
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Constant(c) => Some(c.weights.len()),
            Self::Lipschitz(l) => Some(l.dim),
            Self::Fg(_) => None,
            Self::Table(t) => Some(t.dim),
        }
    }

    /// Checks internal consistency and that the map applies in dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        if let Some(k) = self.dim() {
            if k != d {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: d,
                });
            }
        }
        match self {
            Self::Constant(c) => PortfolioWeights::long_only(c.weights.clone(), 0.0).map(|_| ()),
            Self::Lipschitz(l) => l.validate(),
            Self::Fg(g) => g.check_shape(d),
            Self::Table(t) => t.validate(),
        }
    }

    /// Weights at `x`, written into `out`.
    pub fn weights_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some(k) = self.dim() {
            if k != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: x.len(),
                });
            }
        }
        match self {
            Self::Constant(c) => out.copy_from_slice(&c.weights),
            Self::Lipschitz(l) => l.weights_into(x, out),
            Self::Fg(g) => fg_weights_into(g, x, out)?,
            Self::Table(t) => t.weights_into(x, out),
        }
        Ok(())
    }

    /// Allocating form of [`weights_into`](Self::weights_into).
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.weights_into(x, &mut out)?;
        Ok(out)
    }
}

/// `π(x)` as long-only weights.
pub fn evaluate(map: &PortfolioMapSpec, x: &SimplexPoint) -> Result<PortfolioWeights> {
    let w = map.weights(x.coords())?;
    let margin = match map {
        PortfolioMapSpec::Lipschitz(l) => l.margin,
        PortfolioMapSpec::Table(t) => t.margin,
        _ => 0.0,
    };
    PortfolioWeights::long_only(w.clone(), margin)
        .or_else(|_| PortfolioWeights::long_only(w, 0.0))
        .map_err(|_| invalid("map produced invalid weights"))
}

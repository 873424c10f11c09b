use super::lipschitz::check_weights;
use crate::error::{invalid, Result};
use crate::prelude::*;
use crate::simplex::{Cell, SimplexLattice};
use serde::{Deserialize, Serialize};

/// A tabulated map on the interior lattice `{k/N : k_i ≥ 1, Σ k = N}`,
/// interpolated barycentrically over the Kuhn triangulation of those states.
///
/// Points outside the hull of the states are first pulled onto it, so the
/// map is constant along rays toward the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMap {
    pub dim: usize,
    /// `N`, the grid spacing is `h = 1/N`.
    pub resolution: usize,
    pub values: Vec<Vec<f64>>,
    pub margin: f64,
}

impl TableMap {
    pub fn new(dim: usize, resolution: usize, values: Vec<Vec<f64>>, margin: f64) -> Result<Self> {
        let t = Self {
            dim,
            resolution,
            values,
            margin,
        };
        t.validate()?;
        Ok(t)
    }

    /// The table whose values equal its states (the market map inside the hull).
    pub fn market(dim: usize, resolution: usize) -> Result<Self> {
        let states = Self::state_lattice(dim, resolution)?;
        let values = (0..states.len())
            .map(|i| Self::state_of(resolution, &states, i))
            .collect();
        Self::new(dim, resolution, values, 0.0)
    }

    fn state_lattice(dim: usize, resolution: usize) -> Result<SimplexLattice> {
        if dim < 2 || resolution <= dim {
            return Err(invalid("table resolution must exceed the dimension"));
        }
        Ok(SimplexLattice::new(dim, resolution - dim))
    }

    fn state_of(resolution: usize, lat: &SimplexLattice, i: usize) -> Vec<f64> {
        let n = resolution as f64;
        lat.node(i).iter().map(|&j| (j + 1) as f64 / n).collect()
    }

    /// Lattice of the (shifted) states.
    pub fn lattice(&self) -> SimplexLattice {
        SimplexLattice::new(self.dim, self.resolution - self.dim)
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// State `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        Self::state_of(self.resolution, &self.lattice(), i)
    }

    /// All states, in index order.
    pub fn states(dim: usize, resolution: usize) -> Result<Vec<Vec<f64>>> {
        let lat = Self::state_lattice(dim, resolution)?;
        Ok((0..lat.len())
            .map(|i| Self::state_of(resolution, &lat, i))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        let lat = Self::state_lattice(self.dim, self.resolution)?;
        if self.values.len() != lat.len() || !(0.0..=1.0).contains(&self.margin) {
            return Err(invalid(
                "table needs one value per state and a margin in [0, 1]",
            ));
        }
        let floor = self.margin / self.dim as f64;
        for v in &self.values {
            check_weights(v, self.dim, floor)?;
        }
        Ok(())
    }

    /// Cell of the state triangulation containing the projection of `x`.
    pub fn locate(&self, x: &[f64]) -> Cell {
        let n = self.resolution as f64;
        let inner = (self.resolution - self.dim) as f64;
        let z: Vec<f64> = x
            .iter()
            .map(|&v| ((n * v - 1.0) / inner).max(0.0))
            .collect();
        self.lattice().locate(&z)
    }

    pub fn weights_into(&self, x: &[f64], out: &mut [f64]) {
        let cell = self.locate(x);
        self.weights_at_cell(&cell, out);
    }

    pub fn weights_at_cell(&self, cell: &Cell, out: &mut [f64]) {
        out.fill(0.0);
        for (&n, &w) in cell.nodes.iter().zip(&cell.weights) {
            for (o, v) in out.iter_mut().zip(&self.values[n]) {
                *o += w * v;
            }
        }
    }
}

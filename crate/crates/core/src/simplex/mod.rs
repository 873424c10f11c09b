//! Simplex points, portfolio weights, market paths and grid lattices.

mod lattice;
mod path;
mod point;

pub use lattice::{Cell, SimplexLattice};
pub use path::{quadratic_variation, MarketPath, PathKind, RefiningPartition};
pub use point::{
    make_simplex_point, project_onto_simplex, project_to_margin, uniform, PortfolioWeights,
    SimplexPoint, SUM_TOLERANCE,
};

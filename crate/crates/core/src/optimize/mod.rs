//! Best-in-hindsight portfolios per class, the per-state log-optimal
//! program and its tabulated map, and continuous-time numéraire weights.

mod constant;
mod generator;
mod lipschitz;
mod logopt;

pub use constant::{best_constant, constant_objective};
pub use generator::{best_generator, best_generator_with, master_log_wealth, master_log_wealth_gradient};
pub use lipschitz::{best_lipschitz, best_lipschitz_with, LipschitzSearch};
pub use logopt::{
    log_optimal_from_samples, log_optimal_map, log_optimal_state, numeraire_weights, sample_objective,
    LogOptimalState, LogOptimalTable, DEFAULT_MARGIN,
};

use crate::portfolios::PortfolioMapSpec;
use serde::{Deserialize, Serialize};

/// How a solver finished.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: usize,
    pub starts: usize,
    pub gradient_norm: f64,
}

/// The best map found in a class, with its log relative wealth on the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetroResult {
    pub map: PortfolioMapSpec,
    pub log_wealth: f64,
    pub trace: SolverTrace,
}

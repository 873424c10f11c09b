//! Wealth relative to the market portfolio, accumulated in the log domain.

mod engines;
mod universal;

pub use engines::{
    wealth_diffusion_exponential, wealth_discrete, wealth_master_equation,
    wealth_master_equation_traced, PathwiseIntegrator, WealthCurve,
};
pub use universal::{
    universal_weights_at, wealth_universal, wealth_universal_detailed, PathCells, UniversalWealth,
    WealthMode,
};

//! Growth-optimal, universal and best-in-hindsight portfolios on the simplex.
//!
//! Market states are weight vectors in the open simplex. Portfolios are maps
//! from market states to long-only weights, and all wealth is measured
//! relative to the market portfolio.
//!
//! - [`simplex`]: points, weights, paths, lattices and pathwise quadratic variation.
//! - [`markets`]: Markov kernels, simplex diffusions (Wright–Fisher) and invariant samples.
//! - [`portfolios`]: constant, Lipschitz-grid, functionally generated and tabulated maps,
//!   plus finite mixtures over them.
//! - [`wealth`]: discrete, master-equation, stochastic-exponential and mixture wealth.
//! - [`optimize`]: best-in-hindsight solvers and the log-optimal programs.
//! - [`asymptotics`]: growth-rate estimators, quadratures, comparisons and checks.
//!
//! The crate is `no_std` + `alloc` without the default `std` feature; `std`
//! adds rayon-backed parallel loops whose results are identical to the
//! sequential ones.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod asymptotics;
mod error;
pub mod linalg;
pub mod markets;
pub mod optimize;
pub mod par;
pub mod portfolios;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod wealth;

pub use error::{Error, Result};

pub(crate) mod prelude {
    pub use alloc::string::String;
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[allow(unused_imports)]
    pub use num_traits::Float;
}

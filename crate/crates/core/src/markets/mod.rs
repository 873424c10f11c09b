//! Market-weight generators: Markov kernels on the simplex, simplex
//! diffusions with drift `c λ`, and invariant-measure samples.

mod diffusion;
mod invariant;
mod kernel;

pub use diffusion::{
    euler_step, simulate_diffusion, simulate_diffusion_with_stats, BoundaryRule, BoundaryStats,
    Diffusion, DiffusionModel, WrightFisherSpec, MIN_COORD,
};
pub(crate) use diffusion::{euler_step_with, EulerScratch};
pub use invariant::{invariant_sample_diffusion, invariant_sample_kernel, InvariantSample};
pub use kernel::{
    euler_kernel, simulate_discrete, CycleKernel, EulerKernel, FiniteKernel, IdentityKernel,
    KernelDescriptor, MarkovKernel,
};

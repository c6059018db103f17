//! Markov chain Monte Carlo for low-dimensional posteriors.
//!
//! Targets implement [`ProbModel`] in their natural (constrained) parameter
//! space and declare a [`Transform`] per coordinate. Samplers always move in
//! the unconstrained space and add the log-Jacobian of the inverse transform,
//! so draws stored in a [`Chain`] are back in constrained space.
//!
//! Available kernels:
//!
//! - Gaussian random-walk Metropolis ([`sample_rwmh`])
//! - Hamiltonian Monte Carlo with a fixed number of leapfrog steps,
//!   dual-averaging step-size adaptation and a windowed diagonal mass matrix
//!   estimated during warmup ([`sample_hmc`])
//! - Metropolis-within-Gibbs over a block partition, each block with its own
//!   kernel ([`sample_gibbs_hybrid`])
//!
//! Chains are seeded from one 64-bit seed; chain `k` uses ChaCha stream `k`,
//! so results are bit-identical whether chains run in parallel or not.

mod chain;
mod config;
mod diagnostics;
mod error;
mod hmc;
mod model;
mod sampler;
mod transform;

pub use chain::{pooled, quantile, Chain, ParamSummary};
pub use config::McmcConfig;
pub use diagnostics::{diagnostics, ess_bulk, split_rhat, Diagnostics};
pub use error::McmcError;
pub use hmc::{leapfrog, DualAveraging, LeapfrogState, DIVERGENCE_THRESHOLD};
pub use model::{finite_difference_gradient, ProbModel, Unconstrained};
pub use sampler::{
    chain_rng, sample_gibbs_hybrid, sample_hmc, sample_rwmh, Block, BlockKernel,
};
pub use transform::Transform;

pub type Result<T, E = McmcError> = std::result::Result<T, E>;

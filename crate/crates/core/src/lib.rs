//! Likelihood-free Bayesian inference by approximate Bayesian computation.
//!
//! The crate provides rejection and importance-sampling ABC, an iterative
//! importance sampler whose proposal is a prior/Student-t mixture re-fitted to
//! the weighted sample, the information-preserving linear projection of a
//! summary statistic, Monte Carlo diagnostics, and replicated experiment
//! harnesses for a Gaussian-quantile model and an AR(1) stochastic-volatility
//! model.

pub mod analytics;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod models;
pub mod rng;
pub mod samplers;
mod special;
pub mod types;

pub use error::{AbcError, Result};
pub use kernel::{kernel_eval, lambda_norm, scaled_kernel_eval, Kernel, KernelFamily};
pub use models::{BoxPrior, Model};
pub use rng::{derive_seed, derive_stream, RngStream};
pub use types::{ParameterVector, PosteriorSample, SummaryVector, WeightedParticle};

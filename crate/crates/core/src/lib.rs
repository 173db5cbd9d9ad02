//! Bayesian hierarchical clustering of continuous, correlated data under a
//! Kingman's coalescent prior.
//!
//! The crate is organised bottom-up:
//!
//! - [`special_math`]: log-domain modified Bessel functions, generalized
//!   inverse Gaussian (GIG) densities and a slice sampler for truncated GIG
//!   variates.
//! - [`kernels`]: covariance models over the observation dimensions.
//! - [`coalescent`]: the n-coalescent prior over dendrograms.
//! - [`tree_model`]: Gaussian message passing on a dendrogram and the
//!   resulting marginal likelihood.
//! - [`samplers`]: sequential Monte Carlo samplers (exact, fast approximate
//!   and the cubic reference), greedy fitters and hyperparameter updates.
//! - [`metrics`], [`synthetic`], [`baseline_hc`]: the evaluation harness.

pub mod baseline_hc;
pub mod coalescent;
pub mod data;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod samplers;
pub mod seeding;
pub mod special_math;
pub mod synthetic;
pub mod tree_model;

pub use coalescent::{Dendrogram, Merge};
pub use data::Dataset;
pub use error::{Error, Result};
pub use kernels::{CovarianceModel, KernelKind, Theta};


//! Tree samplers and fitters.
//!
//! - [`run_smc`]: sequential Monte Carlo with exact (`mpost1`) or cached
//!   rate-free (`mpost2`) pair weights.
//! - [`run_postpost`]: the cubic reference, integrating every pair's
//!   normalizer at every stage.
//! - [`run_greedy`]: deterministic mode-seeking agglomeration.
//! - [`sample_hyperparams`] / [`run_alternating`]: covariance updates
//!   interleaved with tree sampling.

mod config;
mod greedy;
mod hyper;
mod resampling;
mod smc;
pub mod weights;

pub use config::{Algorithm, SamplerConfig, WeightMode};
pub use greedy::run_greedy;
pub use hyper::{
    hyper_objective, initial_theta, iteration_seed, run_alternating, sample_hyperparams,
    AlternatingConfig, AlternatingOutput, HyperConfig, HyperObjective,
};
pub use resampling::{effective_sample_size, systematic_resample};
pub use smc::{
    run_postpost, run_smc, sample_categorical, smc_step, PairCandidate, Particle, SmcOutput,
    StepPlan, WeightKind,
};
pub use weights::GreedyFormula;

use crate::data::Dataset;
use crate::error::Result;
use crate::kernels::CovarianceModel;

/// Greedy formula selected by a configuration.
pub fn greedy_formula(cfg: &SamplerConfig) -> GreedyFormula {
    match (cfg.algorithm, cfg.greedy_textbook) {
        (Algorithm::Greedy, _) => GreedyFormula::Original,
        (_, true) => GreedyFormula::Textbook,
        _ => GreedyFormula::Corrected,
    }
}

/// Runs whichever fitter `cfg.algorithm` names. Greedy fitters return a
/// single tree with log weight 0 and an empty ESS trace.
pub fn fit_trees(data: &Dataset, cov: &CovarianceModel, cfg: &SamplerConfig) -> Result<SmcOutput> {
    if cfg.algorithm.is_greedy() {
        cfg.validate()?;
        let tree = run_greedy(data, cov, greedy_formula(cfg))?;
        let log_evidence = crate::tree_model::joint_log_density(data, &tree, cov)?;
        return Ok(SmcOutput {
            trees: vec![tree],
            log_weights: vec![0.0],
            ess_trace: Vec::new(),
            resampled_at: Vec::new(),
            log_evidence,
        });
    }
    run_smc(data, cov, cfg)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// SMC with exact per-stage pair weights.
    Mpost1,
    /// SMC with cached, rate-free pair weights.
    Mpost2,
    /// Cubic reference sampler: every pair normalizer integrated afresh at
    /// every stage.
    Postpost,
    /// Greedy mode-seeking with the original waiting-time formula.
    Greedy,
    /// Greedy mode-seeking with the corrected formula.
    Mgreedy,
}

impl Algorithm {
    pub fn is_greedy(self) -> bool {
        matches!(self, Algorithm::Greedy | Algorithm::Mgreedy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[serde(alias = "exact_bessel")]
    Exact,
    #[serde(alias = "laplace_limit")]
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub particles: usize,
    /// Resample when ESS falls below this fraction of the particle count.
    pub resample_threshold: f64,
    /// Slice window multiplier for merge-time draws.
    pub window_factor: f64,
    pub weight_mode: WeightMode,
    pub seed: u64,
    /// Multiply each pair weight by the GIG mass above `r`, making the pair
    /// distribution exact for the truncated waiting-time law.
    pub truncated_normalizer: bool,
    /// Reweight the fast sampler by exact/approximate weight at the chosen
    /// pair.
    pub exact_correction: bool,
    /// Use the GIG mode (order shifted by one) in the corrected greedy
    /// formula.
    pub greedy_textbook: bool,
    /// Slice updates per merge-time draw.
    pub slice_sweeps: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            algorithm: Algorithm::Mpost2,
            particles: 100,
            resample_threshold: 0.5,
            window_factor: 100.0,
            weight_mode: WeightMode::Exact,
            seed: 0,
            truncated_normalizer: false,
            exact_correction: false,
            greedy_textbook: false,
            slice_sweeps: crate::special_math::DEFAULT_SLICE_SWEEPS,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::Config(format!(
                "resample threshold must lie in [0, 1], got {}",
                self.resample_threshold
            )));
        }
        if !(self.window_factor > 0.0 && self.window_factor.is_finite()) {
            return Err(Error::Config(format!(
                "window factor must be positive, got {}",
                self.window_factor
            )));
        }
        if self.slice_sweeps == 0 {
            return Err(Error::Config("slice_sweeps must be positive".into()));
        }
        Ok(())
    }
}

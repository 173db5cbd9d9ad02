use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Algorithm, SamplerConfig, WeightMode};
use super::resampling::{effective_sample_size, systematic_resample};
use super::weights::{
    fast_log_core, gig_order, pair_log_weight_exact, pair_log_weight_fast,
    pair_log_weight_laplace, pair_log_weight_quadrature, weight_constant, EPS_FLOOR,
};
use crate::coalescent::{merge_rate, Dendrogram, Merge};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::CovarianceModel;
use crate::seeding::{rng_for, tag};
use crate::special_math::{gig_slice_sample_with, log_sum_exp, GigParams};
use crate::tree_model::{combine_means, inflated_variances, r_from_parts};

/// A candidate merge between two active nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCandidate {
    pub left: usize,
    pub right: usize,
    pub eps: f64,
    /// `t_c1 + t_c2 - s_c1 - s_c2`, so that `r = 2 t_prev - const_part`.
    pub const_part: f64,
    /// Rate-free fast weight; NaN when not computed.
    pub cached_log_core: f64,
}

/// How pair weights are evaluated at a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Exact Bessel weights, integral over `v ∈ (0, ∞)`.
    Exact,
    /// Exact weights times the GIG tail mass above `r`.
    ExactTruncated,
    /// Large-argument approximation of the exact weights.
    Laplace,
    /// Laplace weights times the GIG tail mass above `r`.
    LaplaceTruncated,
    /// Cached rate-free weights.
    Fast,
    /// Direct quadrature over `v ∈ (0, ∞)`, with `ε` recomputed from the
    /// node means.
    Quadrature,
    /// Direct quadrature over positive waiting times only.
    QuadratureTruncated,
}

impl WeightKind {
    /// Quadrature weights already include the pair-independent constant.
    pub fn includes_constant(self) -> bool {
        matches!(self, WeightKind::Quadrature | WeightKind::QuadratureTruncated)
    }
}

/// Partial dendrogram together with the messages and candidate cache
/// needed to extend it. Means are stored whitened (`L⁻¹ m`), so that
/// `ε = |w_1 - w_2|²`.
#[derive(Debug, Clone)]
pub struct Particle {
    n: usize,
    d: usize,
    w: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    active: Vec<usize>,
    pairs: Vec<PairCandidate>,
    merges: Vec<Merge>,
    t_prev: f64,
    with_core: bool,
    pub log_weight: f64,
}

impl Particle {
    /// Initial particle with all leaves active. `with_core` caches the fast
    /// weight core for every candidate.
    pub fn new(data: &Dataset, cov: &CovarianceModel, with_core: bool) -> Result<Self> {
        let (n, d) = (data.n(), data.d());
        if n < 2 {
            return Err(Error::Data(format!("need at least two observations, got {n}")));
        }
        if cov.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.dim(),
            });
        }
        let nodes = 2 * n - 1;
        let mut w = vec![0.0; nodes * d];
        for i in 0..n {
            cov.whiten_into(data.row(i), &mut w[i * d..(i + 1) * d]);
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let eps = sq_dist(&w[i * d..(i + 1) * d], &w[j * d..(j + 1) * d]);
                let core = if with_core { fast_log_core(eps, d)? } else { f64::NAN };
                pairs.push(PairCandidate {
                    left: i,
                    right: j,
                    eps,
                    const_part: 0.0,
                    cached_log_core: core,
                });
            }
        }
        Ok(Particle {
            n,
            d,
            w,
            s: vec![0.0; nodes],
            t: vec![0.0; nodes],
            active: (0..n).collect(),
            pairs,
            merges: Vec::with_capacity(n - 1),
            t_prev: 0.0,
            with_core,
            log_weight: 0.0,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.n
    }

    pub fn stage(&self) -> usize {
        self.merges.len()
    }

    pub fn is_complete(&self) -> bool {
        self.merges.len() + 1 == self.n
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    /// Coalescent rate with the current number of active nodes.
    pub fn lambda(&self) -> f64 {
        merge_rate(self.active.len())
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn pairs(&self) -> &[PairCandidate] {
        &self.pairs
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn r(&self, pair: &PairCandidate) -> f64 {
        r_from_parts(self.t_prev, pair.const_part)
    }

    /// Whitened mean of `node`.
    pub fn whitened_mean(&self, node: usize) -> &[f64] {
        &self.w[node * self.d..(node + 1) * self.d]
    }

    /// Variance scale and creation time of `node`.
    pub fn node_state(&self, node: usize) -> (f64, f64) {
        (self.s[node], self.t[node])
    }

    /// Log weight of a single candidate under `kind` (without the
    /// pair-independent constant, except for quadrature kinds).
    pub fn pair_weight(&self, pair: &PairCandidate, kind: WeightKind, log_det: f64) -> Result<f64> {
        let lambda = self.lambda();
        let r = self.r(pair);
        let d = self.d;
        let tail = |eps: f64| -> Result<f64> {
            GigParams::new(gig_order(d), eps.max(EPS_FLOOR), lambda, r)?.log_tail_mass()
        };
        Ok(match kind {
            WeightKind::Exact => pair_log_weight_exact(pair.eps, r, lambda, d)?,
            WeightKind::ExactTruncated => {
                pair_log_weight_exact(pair.eps, r, lambda, d)? + tail(pair.eps)?
            }
            WeightKind::Laplace => pair_log_weight_laplace(pair.eps, r, lambda, d),
            WeightKind::LaplaceTruncated => {
                pair_log_weight_laplace(pair.eps, r, lambda, d) + tail(pair.eps)?
            }
            WeightKind::Fast => {
                let core = if pair.cached_log_core.is_nan() {
                    fast_log_core(pair.eps, d)?
                } else {
                    pair.cached_log_core
                };
                pair_log_weight_fast(core, r, lambda)
            }
            WeightKind::Quadrature | WeightKind::QuadratureTruncated => {
                let eps = sq_dist(self.whitened_mean(pair.left), self.whitened_mean(pair.right));
                let truncated = kind == WeightKind::QuadratureTruncated;
                pair_log_weight_quadrature(eps, r, lambda, d, log_det, truncated)
            }
        })
    }

    /// Log weights of all candidates, in candidate order.
    pub fn candidate_log_weights(&self, kind: WeightKind, log_det: f64) -> Result<Vec<f64>> {
        self.pairs
            .iter()
            .map(|p| self.pair_weight(p, kind, log_det))
            .collect()
    }

    /// Merges candidate `index` after a waiting time `delta`.
    pub fn merge(&mut self, index: usize, delta: f64) -> Result<()> {
        let pair = self.pairs[index];
        let (a, b) = (pair.left, pair.right);
        let d = self.d;
        let t_k = self.t_prev + delta.max(0.0);
        let id = self.n + self.merges.len();
        let (sa, sb) = inflated_variances(t_k, (self.t[a], self.t[b]), (self.s[a], self.s[b]));
        let (head, tail) = self.w.split_at_mut(id * d);
        self.s[id] = combine_means(
            &head[a * d..(a + 1) * d],
            &head[b * d..(b + 1) * d],
            sa,
            sb,
            &mut tail[..d],
        );
        self.t[id] = t_k;
        self.pairs
            .retain(|p| p.left != a && p.left != b && p.right != a && p.right != b);
        self.active.retain(|&x| x != a && x != b);
        for &j in &self.active {
            let eps = sq_dist(
                &self.w[j * d..(j + 1) * d],
                &self.w[id * d..(id + 1) * d],
            );
            let core = if self.with_core { fast_log_core(eps, d)? } else { f64::NAN };
            self.pairs.push(PairCandidate {
                left: j,
                right: id,
                eps,
                const_part: self.t[j] + t_k - self.s[j] - self.s[id],
                cached_log_core: core,
            });
        }
        self.active.push(id);
        self.merges.push(Merge {
            left: a,
            right: b,
            time: t_k,
        });
        self.t_prev = t_k;
        Ok(())
    }

    pub fn tree(&self) -> Result<Dendrogram> {
        if !self.is_complete() {
            return Err(Error::InvalidTree(format!(
                "particle has {} of {} merges",
                self.merges.len(),
                self.n - 1
            )));
        }
        Dendrogram::new(self.n, self.merges.clone())
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index drawn with probability `exp(w_i - lse)`.
pub fn sample_categorical<R: Rng + ?Sized>(log_weights: &[f64], lse: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, w) in log_weights.iter().enumerate() {
        let p = (w - lse).exp();
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last_positive
}

/// What `smc_step` evaluates, derived once from the configuration.
#[derive(Debug, Clone, Copy)]
pub struct StepPlan {
    /// Weights that drive the pair choice.
    pub proposal: WeightKind,
    /// Weights at the chosen pair used to correct the increment, if any.
    pub target: Option<WeightKind>,
    pub window_factor: f64,
    pub slice_sweeps: usize,
}

impl StepPlan {
    pub fn from_config(cfg: &SamplerConfig) -> Result<Self> {
        let base = match (cfg.weight_mode, cfg.truncated_normalizer) {
            (WeightMode::Exact, false) => WeightKind::Exact,
            (WeightMode::Exact, true) => WeightKind::ExactTruncated,
            (WeightMode::Laplace, false) => WeightKind::Laplace,
            (WeightMode::Laplace, true) => WeightKind::LaplaceTruncated,
        };
        let (proposal, target) = match cfg.algorithm {
            Algorithm::Mpost1 => (base, None),
            Algorithm::Mpost2 => (WeightKind::Fast, cfg.exact_correction.then_some(base)),
            Algorithm::Postpost if cfg.truncated_normalizer => {
                (WeightKind::QuadratureTruncated, None)
            }
            Algorithm::Postpost => (WeightKind::Quadrature, None),
            a => {
                return Err(Error::Config(format!(
                    "{a:?} is not a particle sampler"
                )))
            }
        };
        Ok(StepPlan {
            proposal,
            target,
            window_factor: cfg.window_factor,
            slice_sweeps: cfg.slice_sweeps,
        })
    }

    fn needs_core(&self) -> bool {
        self.proposal == WeightKind::Fast
    }
}

/// One stage: weigh all candidates, pick a pair, draw its waiting time from
/// the truncated GIG law and merge. The log normalizer of the pair weights
/// (plus constants) is added to the particle's log weight.
pub fn smc_step<R: Rng + ?Sized>(
    particle: &mut Particle,
    plan: &StepPlan,
    log_det: f64,
    rng: &mut R,
) -> Result<()> {
    if particle.active.len() < 2 {
        return Err(Error::Config("no merges left in this particle".into()));
    }
    let d = particle.d;
    let weights = particle.candidate_log_weights(plan.proposal, log_det)?;
    let lse = log_sum_exp(&weights);
    if !lse.is_finite() {
        return Err(Error::SamplerFailure(format!(
            "pair weights have non-finite normalizer at stage {}",
            particle.stage()
        )));
    }
    let index = sample_categorical(&weights, lse, rng);
    let pair = particle.pairs[index];
    let mut increment = lse;
    if !plan.proposal.includes_constant() {
        increment += weight_constant(d, log_det);
    }
    if let Some(target) = plan.target {
        increment += particle.pair_weight(&pair, target, log_det)? - weights[index];
    }
    let lambda = particle.lambda();
    let r = particle.r(&pair);
    let params = GigParams::new(gig_order(d), pair.eps.max(EPS_FLOOR), lambda, r)?;
    let delta = gig_slice_sample_with(&params, rng, plan.window_factor, plan.slice_sweeps)?;
    particle.log_weight += increment;
    particle.merge(index, delta)
}

/// Weighted particle approximation of the tree posterior.
#[derive(Debug, Clone, Serialize)]
pub struct SmcOutput {
    pub trees: Vec<Dendrogram>,
    pub log_weights: Vec<f64>,
    /// ESS after each stage's weight update.
    pub ess_trace: Vec<f64>,
    /// Stages (0-based) after which the particles were resampled.
    pub resampled_at: Vec<usize>,
    /// Estimate of `log p(X | θ)`; for greedy fits, the joint log density
    /// of the single tree.
    pub log_evidence: f64,
}

impl SmcOutput {
    pub fn normalized_weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - lse).exp()).collect()
    }

    /// Index of the largest weight (smallest index on ties).
    pub fn max_weight_index(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.log_weights.iter().enumerate() {
            if *w > self.log_weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_weight_tree(&self) -> &Dendrogram {
        &self.trees[self.max_weight_index()]
    }
}

fn validate_inputs(data: &Dataset, cov: &CovarianceModel, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if cov.dim() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            got: cov.dim(),
        });
    }
    Ok(())
}

/// Runs `cfg.particles` particles through all `n - 1` stages, resampling
/// systematically whenever the ESS drops below the threshold.
///
/// Particle `i` at stage `k` draws from the stream
/// `(seed, PARTICLE, i, k)`, so output does not depend on thread count.
pub fn run_smc(data: &Dataset, cov: &CovarianceModel, cfg: &SamplerConfig) -> Result<SmcOutput> {
    validate_inputs(data, cov, cfg)?;
    let plan = StepPlan::from_config(cfg)?;
    run_particles(data, cov, cfg, &plan)
}

/// Reference sampler with quadrature normalizers recomputed for every pair
/// at every stage.
pub fn run_postpost(data: &Dataset, cov: &CovarianceModel, cfg: &SamplerConfig) -> Result<SmcOutput> {
    let cfg = SamplerConfig {
        algorithm: Algorithm::Postpost,
        ..cfg.clone()
    };
    run_smc(data, cov, &cfg)
}

fn run_particles(
    data: &Dataset,
    cov: &CovarianceModel,
    cfg: &SamplerConfig,
    plan: &StepPlan,
) -> Result<SmcOutput> {
    let m = cfg.particles;
    let n = data.n();
    let log_det = cov.log_det();
    let template = Particle::new(data, cov, plan.needs_core())?;
    let mut particles = vec![template; m];
    let mut ess_trace = Vec::with_capacity(n - 1);
    let mut resampled_at = Vec::new();
    for stage in 0..n - 1 {
        particles
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(slot, p)| {
                let mut rng = rng_for(cfg.seed, &[tag::PARTICLE, slot as u64, stage as u64]);
                smc_step(p, plan, log_det, &mut rng)
            })?;
        let log_w: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let ess = effective_sample_size(&log_w);
        ess_trace.push(ess);
        if stage + 2 < n && ess < cfg.resample_threshold * m as f64 {
            let mut rng = rng_for(cfg.seed, &[tag::RESAMPLE, stage as u64]);
            let idx = systematic_resample(&log_w, m, &mut rng);
            let level = log_sum_exp(&log_w) - (m as f64).ln();
            particles = idx
                .iter()
                .map(|&i| {
                    let mut p = particles[i].clone();
                    p.log_weight = level;
                    p
                })
                .collect();
            resampled_at.push(stage);
        }
    }
    let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let log_evidence = log_sum_exp(&log_weights) - (m as f64).ln();
    let trees = particles.iter().map(Particle::tree).collect::<Result<Vec<_>>>()?;
    Ok(SmcOutput {
        trees,
        log_weights,
        ess_trace,
        resampled_at,
        log_evidence,
    })
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SamplerConfig;
use super::fit_trees;
use super::smc::SmcOutput;
use crate::coalescent::Dendrogram;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{build_covariance, log_bounds, Coords, CovarianceModel, KernelKind, Theta};
use crate::seeding::{derive_seed, rng_for, tag};
use crate::special_math::{log_sum_exp, slice_step, SliceOptions};
use crate::tree_model::merge_log_zs;

/// Objective maximized (in distribution) by the hyperparameter updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperObjective {
    /// `Σ_k log Z_k`, the tree log likelihood.
    #[default]
    LogLikelihood,
    /// `log Σ_k Z_k`; kept for comparison only.
    LiteralSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperConfig {
    /// Coordinates (by name, e.g. `"sigma2"`) that are never updated.
    pub pinned: Vec<String>,
    pub objective: HyperObjective,
    /// Initial slice bracket width on the log scale.
    pub slice_width: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            pinned: Vec::new(),
            objective: HyperObjective::LogLikelihood,
            slice_width: 1.0,
        }
    }
}

pub fn hyper_objective(
    data: &Dataset,
    tree: &Dendrogram,
    cov: &CovarianceModel,
    objective: HyperObjective,
) -> Result<f64> {
    let zs = merge_log_zs(data, tree, cov)?;
    Ok(match objective {
        HyperObjective::LogLikelihood => zs.iter().sum(),
        HyperObjective::LiteralSum => log_sum_exp(&zs),
    })
}

/// One sweep of coordinate-wise slice sampling on the log scale of every
/// free hyperparameter, with a flat prior on the log scale within bounds.
///
/// A coordinate keeps its value if a factorization fails or the slice
/// update gives up; nonpositive coordinates (e.g. `sigma2 = 0`) are left
/// alone.
pub fn sample_hyperparams<R: Rng + ?Sized>(
    data: &Dataset,
    tree: &Dendrogram,
    cov: &CovarianceModel,
    hc: &HyperConfig,
    rng: &mut R,
) -> Result<CovarianceModel> {
    let d = data.d();
    let coords = cov.coords().cloned();
    let mut current = cov.clone();
    let names = cov.theta().names();
    for (i, name) in names.iter().enumerate() {
        if hc.pinned.iter().any(|p| p == name) {
            continue;
        }
        let value = current.theta().get(i);
        if value <= 0.0 {
            continue;
        }
        let (lo, hi) = log_bounds(name);
        let x0 = value.ln().clamp(lo + 1e-12, hi - 1e-12);
        let theta0 = current.theta().clone();
        let mut failed = false;
        let log_f = |u: f64| -> f64 {
            if u <= lo || u >= hi {
                return f64::NEG_INFINITY;
            }
            match build_covariance(&theta0.with(i, u.exp()), coords.as_ref(), d)
                .and_then(|c| hyper_objective(data, tree, &c, hc.objective))
            {
                Ok(v) if v.is_finite() => v,
                _ => {
                    failed = true;
                    f64::NEG_INFINITY
                }
            }
        };
        let opts = SliceOptions {
            width: hc.slice_width,
            ..SliceOptions::default()
        };
        let step = slice_step(x0, log_f, lo, hi, &opts, rng);
        if let (Ok(x1), false) = (step, failed) {
            current = build_covariance(&theta0.with(i, x1.exp()), coords.as_ref(), d)?;
        }
    }
    Ok(current)
}

/// Moment-based starting values. Length scales come from the lag-one
/// correlation of consecutive row differences between neighbouring
/// dimensions; `sigma2` is taken as given.
pub fn initial_theta(data: &Dataset, kind: KernelKind, coords: Option<&Coords>, sigma2: f64) -> Result<Theta> {
    let d = data.d();
    let diffs: Vec<Vec<f64>> = (1..data.n())
        .map(|i| data.row(i).iter().zip(data.row(i - 1)).map(|(a, b)| a - b).collect())
        .collect();
    let corr = |pairs: &[(usize, usize)]| -> f64 {
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for row in &diffs {
            for &(a, b) in pairs {
                sxy += row[a] * row[b];
                sxx += row[a] * row[a];
                syy += row[b] * row[b];
            }
        }
        let rho = sxy / (sxx * syy).sqrt();
        if rho.is_finite() {
            rho.clamp(1e-6, 1.0 - 1e-9)
        } else {
            0.5
        }
    };
    Ok(match kind {
        KernelKind::SquaredExponential => {
            let pos: Vec<f64> = match coords {
                Some(Coords::Positions(p)) => p.clone(),
                Some(Coords::Grid(_)) => {
                    return Err(Error::Config("squared exponential kernel needs 1-D positions".into()))
                }
                None => (0..d).map(|i| i as f64).collect(),
            };
            let ell = if d < 2 {
                1.0
            } else {
                let mut order: Vec<usize> = (0..d).collect();
                order.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]));
                let pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
                let gap2 = pairs.iter().map(|&(a, b)| (pos[a] - pos[b]).powi(2)).sum::<f64>()
                    / pairs.len() as f64;
                -gap2 / (2.0 * corr(&pairs).ln())
            };
            Theta::SquaredExponential { ell: clamp_log(ell, "ell"), sigma2 }
        }
        KernelKind::Matern32Grid => {
            let [h, w] = match coords {
                Some(Coords::Grid(g)) => *g,
                _ => return Err(Error::Config("Matérn grid kernel needs grid coordinates".into())),
            };
            let along_x: Vec<(usize, usize)> = (0..h)
                .flat_map(|r| (1..w).map(move |c| (r * w + c - 1, r * w + c)))
                .collect();
            let along_y: Vec<(usize, usize)> = (1..h)
                .flat_map(|r| (0..w).map(move |c| ((r - 1) * w + c, r * w + c)))
                .collect();
            let ell_of = |pairs: &[(usize, usize)]| {
                if pairs.is_empty() {
                    1.0
                } else {
                    3f64.sqrt() / matern_inverse(corr(pairs))
                }
            };
            Theta::Matern32Grid {
                ell_x: clamp_log(ell_of(&along_x), "ell_x"),
                ell_y: clamp_log(ell_of(&along_y), "ell_y"),
                sigma2,
            }
        }
        KernelKind::Diagonal => Theta::Diagonal { variances: vec![1.0; d] },
    })
}

fn clamp_log(v: f64, name: &str) -> f64 {
    let (lo, hi) = log_bounds(name);
    v.ln().clamp(lo, hi).exp()
}

/// Solves `(1 + a) e^{-a} = rho` for `a > 0` by bisection.
fn matern_inverse(rho: f64) -> f64 {
    let f = |a: f64| (1.0 + a) * (-a).exp() - rho;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlternatingConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub hyper: HyperConfig,
}

impl Default for AlternatingConfig {
    fn default() -> Self {
        AlternatingConfig {
            iterations: 50,
            burn_in: 10,
            hyper: HyperConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternatingOutput {
    /// Particle set of the final iteration.
    pub last: SmcOutput,
    /// Hyperparameters drawn after each post-burn-in iteration.
    pub theta_trace: Vec<Theta>,
    /// Max-weight tree of each post-burn-in iteration.
    pub tree_trace: Vec<Dendrogram>,
    pub log_evidence_trace: Vec<f64>,
    #[serde(skip)]
    pub covariance: CovarianceModel,
}

/// Tree seed for alternating iteration `iter`.
pub fn iteration_seed(master: u64, iter: usize) -> u64 {
    derive_seed(master, &[tag::ITERATION, iter as u64])
}

/// Alternates tree sampling given θ with one hyperparameter sweep given
/// the max-weight tree.
pub fn run_alternating(
    data: &Dataset,
    init: &CovarianceModel,
    cfg: &SamplerConfig,
    alt: &AlternatingConfig,
) -> Result<AlternatingOutput> {
    if alt.iterations == 0 || alt.burn_in >= alt.iterations {
        return Err(Error::Config(format!(
            "need iterations > burn-in, got {} and {}",
            alt.iterations, alt.burn_in
        )));
    }
    let mut cov = init.clone();
    let mut theta_trace = Vec::with_capacity(alt.iterations - alt.burn_in);
    let mut tree_trace = Vec::with_capacity(alt.iterations - alt.burn_in);
    let mut log_evidence_trace = Vec::with_capacity(alt.iterations);
    let mut last = None;
    for iter in 0..alt.iterations {
        let run_cfg = SamplerConfig {
            seed: iteration_seed(cfg.seed, iter),
            ..cfg.clone()
        };
        let out = fit_trees(data, &cov, &run_cfg)?;
        log_evidence_trace.push(out.log_evidence);
        let tree = out.max_weight_tree().clone();
        let mut rng = rng_for(cfg.seed, &[tag::HYPER, iter as u64]);
        cov = sample_hyperparams(data, &tree, &cov, &alt.hyper, &mut rng)?;
        if iter >= alt.burn_in {
            theta_trace.push(cov.theta().clone());
            tree_trace.push(tree);
        }
        last = Some(out);
    }
    Ok(AlternatingOutput {
        last: last.expect("at least one iteration"),
        theta_trace,
        tree_trace,
        log_evidence_trace,
        covariance: cov,
    })
}

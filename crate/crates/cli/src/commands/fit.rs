use std::path::{Path, PathBuf};
use std::time::Instant;

use coalhc_core::baseline_hc::average_link;
use coalhc_core::kernels::{build_covariance, Coords};
use coalhc_core::metrics::tree_distance_matrix;
use coalhc_core::samplers::{
    fit_trees, initial_theta, run_alternating, Algorithm, AlternatingConfig, SamplerConfig,
};
use coalhc_core::{CovarianceModel, Dataset, Dendrogram, KernelKind, Theta};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io;
use crate::{AlgorithmArg, FitArgs};

/// Optional JSON settings for `fit`. Every field may be overridden by a
/// command-line flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfigFile {
    /// Overrides `sampler.algorithm`; also accepts `"hc"`.
    pub algorithm: Option<String>,
    pub sampler: Option<SamplerConfig>,
    /// Present to alternate tree and hyperparameter updates.
    pub alternating: Option<AlternatingConfig>,
    pub kernel: Option<KernelKind>,
    pub theta: Option<Theta>,
    pub fix_sigma2: Option<f64>,
}

/// Fully resolved fit settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSettings {
    pub algorithm: String,
    pub sampler: SamplerConfig,
    pub alternating: Option<AlternatingConfig>,
    pub theta: Theta,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub settings: FitSettings,
    /// Hyperparameters after fitting (equal to the input ones unless they
    /// were learned).
    pub theta: Theta,
    pub theta_trace: Vec<Theta>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub ess_trace: Vec<f64>,
    pub resampled_at: Vec<usize>,
    pub log_evidence: Option<f64>,
    pub log_evidence_trace: Vec<f64>,
    pub max_weight_index: usize,
    pub trees: Vec<Dendrogram>,
    pub runtime_seconds: f64,
}

/// Untimed part of a fit's output.
pub struct FitOutcome {
    pub cov: CovarianceModel,
    pub theta_trace: Vec<Theta>,
    pub log_weights: Vec<f64>,
    pub ess_trace: Vec<f64>,
    pub resampled_at: Vec<usize>,
    pub log_evidence: Option<f64>,
    pub log_evidence_trace: Vec<f64>,
    pub trees: Vec<Dendrogram>,
}

fn parse_algorithm(name: &str) -> CliResult<AlgorithmArg> {
    <AlgorithmArg as clap::ValueEnum>::from_str(name, true)
        .map_err(|_| CliError::config(format!("unknown algorithm {name:?}")))
}

fn from_sampler(a: Algorithm) -> AlgorithmArg {
    match a {
        Algorithm::Mpost1 => AlgorithmArg::Mpost1,
        Algorithm::Mpost2 => AlgorithmArg::Mpost2,
        Algorithm::Postpost => AlgorithmArg::Postpost,
        Algorithm::Greedy => AlgorithmArg::Greedy,
        Algorithm::Mgreedy => AlgorithmArg::Mgreedy,
    }
}

/// Accepts either a bare hyperparameter record or a generated `theta.json`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ThetaFile {
    Wrapped { theta: Theta },
    Bare(Theta),
}

pub fn read_theta(path: &Path) -> CliResult<Theta> {
    Ok(match io::read_config::<ThetaFile>(path)? {
        ThetaFile::Wrapped { theta } | ThetaFile::Bare(theta) => theta,
    })
}

fn with_sigma2(theta: Theta, sigma2: f64) -> CliResult<Theta> {
    match theta {
        Theta::SquaredExponential { ell, .. } => Ok(Theta::SquaredExponential { ell, sigma2 }),
        Theta::Matern32Grid { ell_x, ell_y, .. } => Ok(Theta::Matern32Grid { ell_x, ell_y, sigma2 }),
        Theta::Diagonal { .. } => Err(CliError::config("--fix-sigma2 does not apply to the diagonal kernel")),
    }
}

/// Directory-or-file resolution for `--data`.
pub fn data_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("data.csv")
    } else {
        p.to_path_buf()
    }
}

fn sibling(data: &Path, name: &str) -> Option<PathBuf> {
    let p = data.parent()?.join(name);
    p.is_file().then_some(p)
}

/// Merges the settings file and the flags.
pub fn resolve_settings(a: &FitArgs, data: &Dataset, coords: Option<&Coords>) -> CliResult<FitSettings> {
    let file: FitConfigFile = match &a.config {
        Some(p) => io::read_config(p)?,
        None => FitConfigFile::default(),
    };
    let mut sampler = file.sampler.clone().unwrap_or_default();
    let algorithm = match (a.algorithm, &file.algorithm) {
        (Some(alg), _) => alg,
        (None, Some(name)) => parse_algorithm(name)?,
        (None, None) => from_sampler(sampler.algorithm),
    };
    if let Some(alg) = algorithm.sampler() {
        sampler.algorithm = alg;
    }
    sampler.seed = a.seed;
    if let Some(m) = a.particles {
        sampler.particles = m;
    }
    if let Some(w) = a.delta0 {
        sampler.window_factor = w;
    }
    if let Some(w) = a.weight_mode {
        sampler.weight_mode = w.into();
    }
    if let Some(t) = a.resample_threshold {
        sampler.resample_threshold = t;
    }
    sampler.exact_correction |= a.exact_correction;
    sampler.truncated_normalizer |= a.truncated;
    sampler.validate()?;

    let mut alternating = file.alternating.clone();
    if let Some(iterations) = a.iterations {
        let mut alt = alternating.unwrap_or_default();
        alt.iterations = iterations;
        if a.burn_in.is_none() && alt.burn_in >= iterations {
            alt.burn_in = iterations.saturating_sub(1).min(10);
        }
        alternating = Some(alt);
    }
    if let (Some(b), Some(alt)) = (a.burn_in, alternating.as_mut()) {
        alt.burn_in = b;
    }
    if a.burn_in.is_some() && alternating.is_none() {
        return Err(CliError::config("--burn-in needs --iterations"));
    }
    if alternating.is_some() && algorithm == AlgorithmArg::Hc {
        return Err(CliError::config("hyperparameter learning is not available for hc"));
    }

    let fix_sigma2 = a.fix_sigma2.or(file.fix_sigma2);
    let mut theta = match (&a.theta, &file.theta) {
        (Some(p), _) => read_theta(p)?,
        (None, Some(t)) => t.clone(),
        (None, None) => {
            let kind = a.kernel.map(KernelKind::from).or(file.kernel).unwrap_or(KernelKind::SquaredExponential);
            initial_theta(data, kind, coords, fix_sigma2.unwrap_or(1e-3))?
        }
    };
    if let Some(s) = fix_sigma2 {
        theta = with_sigma2(theta, s)?;
        if let Some(alt) = alternating.as_mut() {
            if !alt.hyper.pinned.iter().any(|p| p == "sigma2") {
                alt.hyper.pinned.push("sigma2".into());
            }
        }
    }
    Ok(FitSettings { algorithm: algorithm.name().to_string(), sampler, alternating, theta })
}

/// Runs the configured fitter on `data`.
pub fn fit_dataset(data: &Dataset, coords: Option<&Coords>, settings: &FitSettings) -> CliResult<FitOutcome> {
    let cov = build_covariance(&settings.theta, coords, data.d())?;
    if settings.algorithm == "hc" {
        return Ok(FitOutcome {
            cov,
            theta_trace: Vec::new(),
            log_weights: vec![0.0],
            ess_trace: Vec::new(),
            resampled_at: Vec::new(),
            log_evidence: None,
            log_evidence_trace: Vec::new(),
            trees: vec![average_link(data)?],
        });
    }
    Ok(match &settings.alternating {
        Some(alt) => {
            let out = run_alternating(data, &cov, &settings.sampler, alt)?;
            FitOutcome {
                cov: out.covariance,
                theta_trace: out.theta_trace,
                log_weights: out.last.log_weights,
                ess_trace: out.last.ess_trace,
                resampled_at: out.last.resampled_at,
                log_evidence: Some(out.last.log_evidence),
                log_evidence_trace: out.log_evidence_trace,
                trees: out.last.trees,
            }
        }
        None => {
            let out = fit_trees(data, &cov, &settings.sampler)?;
            FitOutcome {
                cov,
                theta_trace: Vec::new(),
                log_weights: out.log_weights,
                ess_trace: out.ess_trace,
                resampled_at: out.resampled_at,
                log_evidence: Some(out.log_evidence),
                log_evidence_trace: Vec::new(),
                trees: out.trees,
            }
        }
    })
}

fn normalize(log_w: &[f64]) -> Vec<f64> {
    let lse = coalhc_core::special_math::log_sum_exp(log_w);
    log_w.iter().map(|w| (w - lse).exp()).collect()
}

/// Weighted geometric mean of the cophenetic matrices, zero on the
/// diagonal.
pub fn summary_distance(trees: &[Dendrogram], weights: &[f64]) -> Vec<f64> {
    let n = trees[0].n_leaves;
    let mut acc = vec![0.0; n * n];
    for (t, &w) in trees.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(tree_distance_matrix(t)) {
            *a += w * v.ln();
        }
    }
    for i in 0..n {
        acc[i * n + i] = f64::NEG_INFINITY;
    }
    acc.into_iter().map(f64::exp).collect()
}

pub fn run(a: &FitArgs) -> CliResult<()> {
    let data_file = data_path(&a.data);
    let data = io::read_dataset(&data_file)?;
    let coords_file = a.coords.clone().or_else(|| sibling(&data_file, "coords.json"));
    let coords: Option<Coords> = coords_file.as_deref().map(io::read_config).transpose()?;
    let settings = resolve_settings(a, &data, coords.as_ref())?;

    let start = Instant::now();
    let out = fit_dataset(&data, coords.as_ref(), &settings)?;
    let runtime_seconds = start.elapsed().as_secs_f64();

    let weights = normalize(&out.log_weights);
    let mut best = 0;
    for (i, w) in out.log_weights.iter().enumerate() {
        if *w > out.log_weights[best] {
            best = i;
        }
    }
    for (i, t) in out.trees.iter().enumerate() {
        io::write_string(&a.out.join("trees").join(format!("particle_{i:04}.newick")), &(t.to_newick(None) + "\n"))?;
    }
    let dist = summary_distance(&out.trees, &weights);
    io::write_matrix(&a.out.join("distance.csv"), data.n(), data.n(), &dist)?;
    if let Some(labels) = &a.labels {
        let l = io::read_labels(labels)?;
        if l.len() != data.n() {
            return Err(CliError::data(format!("{} has {} labels for {} rows", labels.display(), l.len(), data.n())));
        }
        io::write_labels(&a.out.join("labels.csv"), &l)?;
    }
    let result = FitResult {
        theta: out.cov.theta().clone(),
        settings,
        theta_trace: out.theta_trace,
        log_weights: out.log_weights,
        weights,
        ess_trace: out.ess_trace,
        resampled_at: out.resampled_at,
        log_evidence: out.log_evidence,
        log_evidence_trace: out.log_evidence_trace,
        max_weight_index: best,
        trees: out.trees,
        runtime_seconds,
    };
    io::write_json(&a.out.join("result.json"), &result)
}

use std::time::Instant;

use coalhc_core::seeding::{derive_seed, tag};
use coalhc_core::synthetic::{default_theta, generate_replicate, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::commands::fit::{fit_dataset, FitSettings};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::{AlgorithmArg, BenchArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub threads: usize,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub algorithm: String,
    pub n: usize,
    pub seconds: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Least-squares fit of `log(seconds) = log(kappa) + exponent * log(n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scaling {
    pub algorithm: String,
    pub exponent: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: Machine,
    pub seed: u64,
    pub dim: usize,
    pub particles: usize,
    pub repeats: usize,
    pub postpost_cap: usize,
    pub timings: Vec<Timing>,
    /// `(algorithm, n)` combinations left out by the cost guard.
    pub skipped: Vec<(String, usize)>,
    pub scaling: Vec<Scaling>,
}

fn machine() -> Machine {
    Machine {
        os: std::env::consts::OS.to_string(),
        arch: std::env::consts::ARCH.to_string(),
        logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        threads: rayon::current_num_threads(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn fit_scaling(algorithm: &str, points: &[(usize, f64)]) -> Option<Scaling> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, t)| *t > 0.0)
        .map(|&(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(Scaling { algorithm: algorithm.to_string(), exponent: slope, kappa: (my - slope * mx).exp() })
}

pub fn bench(a: &BenchArgs) -> CliResult<BenchReport> {
    if a.sizes.is_empty() || a.sizes.iter().any(|&n| n < 2) || a.repeats == 0 || a.dim == 0 {
        return Err(CliError::config("bench needs sizes >= 2, dim >= 1 and repeats >= 1"));
    }
    if a.algorithms.contains(&AlgorithmArg::Hc) {
        return Err(CliError::config("hc is not part of the benchmark set"));
    }
    let mut timings = Vec::new();
    let mut skipped = Vec::new();
    for (i, &n) in a.sizes.iter().enumerate() {
        let spec = SyntheticSpec {
            n,
            d: a.dim,
            theta: default_theta(a.dim),
            coords: None,
            seed: derive_seed(a.seed, &[tag::DATA, i as u64]),
            replicates: 1,
        };
        let rep = generate_replicate(&spec, 0)?;
        for &alg in &a.algorithms {
            if alg == AlgorithmArg::Postpost && n > a.postpost_cap {
                skipped.push((alg.name().to_string(), n));
                continue;
            }
            let mut sampler = coalhc_core::samplers::SamplerConfig {
                particles: a.particles,
                seed: a.seed,
                ..Default::default()
            };
            sampler.algorithm = alg.sampler().expect("hc excluded above");
            let settings = FitSettings {
                algorithm: alg.name().to_string(),
                sampler,
                alternating: None,
                theta: spec.theta.clone(),
            };
            let mut seconds = Vec::with_capacity(a.repeats);
            for _ in 0..a.repeats {
                let start = Instant::now();
                fit_dataset(&rep.data, None, &settings)?;
                seconds.push(start.elapsed().as_secs_f64());
            }
            let mean = seconds.iter().sum::<f64>() / seconds.len() as f64;
            let sd = if seconds.len() > 1 {
                (seconds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (seconds.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            timings.push(Timing { algorithm: alg.name().to_string(), n, seconds, mean, sd });
        }
    }
    let scaling = a
        .algorithms
        .iter()
        .filter_map(|alg| {
            let pts: Vec<(usize, f64)> =
                timings.iter().filter(|t| t.algorithm == alg.name()).map(|t| (t.n, t.mean)).collect();
            fit_scaling(alg.name(), &pts)
        })
        .collect();
    Ok(BenchReport {
        machine: machine(),
        seed: a.seed,
        dim: a.dim,
        particles: a.particles,
        repeats: a.repeats,
        postpost_cap: a.postpost_cap,
        timings,
        skipped,
        scaling,
    })
}

pub fn run(a: &BenchArgs) -> CliResult<()> {
    let report = bench(a)?;
    io::write_json(&a.out.join("bench.json"), &report)?;
    let mut csv = String::from("algorithm,n,mean_seconds,sd_seconds\n");
    for t in &report.timings {
        csv.push_str(&format!("{},{},{},{}\n", t.algorithm, t.n, io::format_f64(t.mean), io::format_f64(t.sd)));
    }
    io::write_string(&a.out.join("bench.csv"), &csv)
}

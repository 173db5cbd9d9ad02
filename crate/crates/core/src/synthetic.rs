//! Ground-truth data: a coalescent tree with Brownian diffusion of the
//! node values down its branches.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coalescent::{sample_prior, Dendrogram};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{build_covariance, Coords, CovarianceModel, Theta};
use crate::seeding::{rng_for, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub theta: Theta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Coords>,
    pub seed: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    D1,
    D2,
    D3,
}

impl Preset {
    pub fn size(self) -> (usize, usize) {
        match self {
            Preset::D1 => (32, 32),
            Preset::D2 => (64, 64),
            Preset::D3 => (128, 128),
        }
    }
}

/// Default true hyperparameters: squared exponential with `ell = d/4`
/// and `sigma2 = 1e-9`.
pub fn default_theta(d: usize) -> Theta {
    Theta::SquaredExponential {
        ell: d as f64 / 4.0,
        sigma2: 1e-9,
    }
}

impl SyntheticSpec {
    pub fn preset(preset: Preset, seed: u64, replicates: usize) -> Self {
        let (n, d) = preset.size();
        SyntheticSpec {
            n,
            d,
            theta: default_theta(d),
            coords: None,
            seed,
            replicates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 1 {
            return Err(Error::Config(format!(
                "synthetic data needs n >= 2 and d >= 1, got n={} d={}",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Replicate {
    pub data: Dataset,
    pub tree: Dendrogram,
    pub theta: Theta,
}

/// Diffuses values down `tree` from a zero root: each child is its parent
/// plus `N(0, Δ Φ)` noise, `Δ` being the branch length.
pub fn diffuse<R: Rng + ?Sized>(tree: &Dendrogram, cov: &CovarianceModel, rng: &mut R) -> Dataset {
    let n = tree.n_leaves;
    let d = cov.dim();
    let times = tree.node_times();
    let mut values = vec![0.0; tree.n_nodes() * d];
    // parents are created after children, so walk merges from the root down
    for (k, m) in tree.merges.iter().enumerate().rev() {
        let parent = n + k;
        for child in [m.left, m.right] {
            let branch = (times[parent] - times[child]).max(0.0);
            let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let step = cov.color(&xi);
            for j in 0..d {
                values[child * d + j] = values[parent * d + j] + branch.sqrt() * step[j];
            }
        }
    }
    values.truncate(n * d);
    Dataset::new(n, d, values).expect("diffused values are finite")
}

/// Replicate `index` of `spec`; streams depend only on `(seed, index)`.
pub fn generate_replicate(spec: &SyntheticSpec, index: usize) -> Result<Replicate> {
    spec.validate()?;
    let cov = build_covariance(&spec.theta, spec.coords.as_ref(), spec.d)?;
    let mut rng = rng_for(spec.seed, &[tag::REPLICATE, index as u64]);
    let tree = sample_prior(spec.n, &mut rng)?;
    let data = diffuse(&tree, &cov, &mut rng);
    Ok(Replicate {
        data,
        tree,
        theta: spec.theta.clone(),
    })
}

/// The first replicate of `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<Replicate> {
    generate_replicate(spec, 0)
}

/// Labelled Gaussian mixture: `classes` centres drawn from `N(0, spread² Φ)`
/// and points scattered around them with `N(0, Φ)`. Class sizes differ
/// by at most one; labels are `i % classes`.
pub fn labelled_mixture(
    n: usize,
    classes: usize,
    spread: f64,
    cov: &CovarianceModel,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if classes == 0 || classes > n {
        return Err(Error::Config(format!("need 1 <= classes <= n, got {classes}")));
    }
    let d = cov.dim();
    let mut rng = rng_for(seed, &[tag::DATA]);
    let mut draw = |scale: f64| -> Vec<f64> {
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        cov.color(&xi).into_iter().map(|v| v * scale).collect()
    };
    let centres: Vec<Vec<f64>> = (0..classes).map(|_| draw(spread)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut values = Vec::with_capacity(n * d);
    for &c in &labels {
        let noise = draw(1.0);
        values.extend(centres[c].iter().zip(noise).map(|(a, b)| a + b));
    }
    Ok((Dataset::new(n, d, values)?, labels))
}

use std::path::{Path, PathBuf};

use coalhc_core::kernels::{build_covariance, Coords};
use coalhc_core::seeding::{derive_seed, tag};
use coalhc_core::synthetic::{generate_replicate, labelled_mixture, SyntheticSpec};
use coalhc_core::{Dendrogram, Theta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io;
use crate::{GenerateArgs, KernelArg};

/// Contents of `theta.json`: the generating hyperparameters plus enough
/// metadata to regenerate the replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateMeta {
    pub theta: Theta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Coords>,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub replicate: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
}

/// `<out>/seed_<seed>/rep_<index>`.
pub fn replicate_dir(out: &Path, seed: u64, index: usize) -> PathBuf {
    out.join(format!("seed_{seed}")).join(format!("rep_{index:03}"))
}

fn parse_grid(s: &str) -> CliResult<[usize; 2]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    match parts.as_slice() {
        [h, w] => match (h.trim().parse(), w.trim().parse()) {
            (Ok(h), Ok(w)) if h > 0 && w > 0 => Ok([h, w]),
            _ => Err(CliError::config(format!("bad grid {s:?}, expected HxW"))),
        },
        _ => Err(CliError::config(format!("bad grid {s:?}, expected HxW"))),
    }
}

fn resolve_spec(a: &GenerateArgs) -> CliResult<(SyntheticSpec, Option<String>)> {
    let (pn, pd) = a.preset.map(|p| coalhc_core::synthetic::Preset::from(p).size()).unzip();
    let n = a.n.or(pn).ok_or_else(|| CliError::config("--n or --preset is required"))?;
    let d = a.d.or(pd).ok_or_else(|| CliError::config("--d or --preset is required"))?;
    let replicates = a.replicates.unwrap_or(if a.preset.is_some() { 50 } else { 1 });
    let (theta, coords) = match a.kernel {
        KernelArg::Se => (
            Theta::SquaredExponential { ell: a.ell.unwrap_or(d as f64 / 4.0), sigma2: a.sigma2 },
            None,
        ),
        KernelArg::Matern32 => {
            let grid = parse_grid(a.grid.as_deref().ok_or_else(|| CliError::config("--grid is required for matern32"))?)?;
            if grid[0] * grid[1] != d {
                return Err(CliError::config(format!("grid {}x{} does not have {d} cells", grid[0], grid[1])));
            }
            let ell = a.ell.unwrap_or(grid[0].max(grid[1]) as f64 / 4.0);
            (Theta::Matern32Grid { ell_x: ell, ell_y: ell, sigma2: a.sigma2 }, Some(Coords::Grid(grid)))
        }
        KernelArg::Diagonal => (Theta::Diagonal { variances: vec![1.0; d] }, None),
    };
    let spec = SyntheticSpec { n, d, theta, coords, seed: a.seed, replicates };
    spec.validate()?;
    let preset = a.preset.map(|p| format!("{p:?}").to_lowercase());
    Ok((spec, preset))
}

fn write_tree(dir: &Path, tree: &Dendrogram) -> CliResult<()> {
    io::write_string(&dir.join("truth.newick"), &(tree.to_newick(None) + "\n"))?;
    io::write_json(&dir.join("truth.json"), tree)
}

pub fn run(a: &GenerateArgs) -> CliResult<()> {
    let (spec, preset) = resolve_spec(a)?;
    if let Some(c) = a.classes {
        if c == 0 || c > spec.n {
            return Err(CliError::config(format!("--classes must lie in 1..={}", spec.n)));
        }
    }
    let cov = build_covariance(&spec.theta, spec.coords.as_ref(), spec.d)?;
    (0..spec.replicates).into_par_iter().try_for_each(|i| -> CliResult<()> {
        let dir = replicate_dir(&a.out, spec.seed, i);
        let meta = GenerateMeta {
            theta: spec.theta.clone(),
            coords: spec.coords.clone(),
            n: spec.n,
            d: spec.d,
            seed: spec.seed,
            replicate: i,
            preset: preset.clone(),
            classes: a.classes,
        };
        match a.classes {
            Some(classes) => {
                let seed = derive_seed(spec.seed, &[tag::REPLICATE, i as u64]);
                let (data, labels) = labelled_mixture(spec.n, classes, a.spread, &cov, seed)?;
                io::write_dataset(&dir.join("data.csv"), &data)?;
                io::write_labels(&dir.join("labels.csv"), &labels)?;
            }
            None => {
                let rep = generate_replicate(&spec, i)?;
                io::write_dataset(&dir.join("data.csv"), &rep.data)?;
                write_tree(&dir, &rep.tree)?;
            }
        }
        if let Some(c) = &spec.coords {
            io::write_json(&dir.join("coords.json"), c)?;
        }
        io::write_json(&dir.join("theta.json"), &meta)
    })
}

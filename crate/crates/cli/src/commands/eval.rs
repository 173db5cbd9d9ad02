use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use coalhc_core::metrics::evaluate;
use coalhc_core::Dendrogram;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::fit::FitResult;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::EvalArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub files: usize,
    pub metrics: BTreeMap<String, Summary>,
}

fn existing(p: PathBuf) -> Option<PathBuf> {
    p.is_file().then_some(p)
}

fn truth_tree(path: &Path) -> CliResult<Option<Dendrogram>> {
    if path.is_file() {
        return io::read_json(path).map(Some);
    }
    match existing(path.join("truth.json")) {
        Some(p) => io::read_json(&p).map(Some),
        None => Ok(None),
    }
}

pub fn run(a: &EvalArgs) -> CliResult<()> {
    if let Some(root) = &a.aggregate {
        let report = aggregate(root)?;
        return io::write_json(&a.out.join("summary.json"), &report);
    }
    let fit_dir = a.fit.as_ref().ok_or_else(|| CliError::config("--fit is required"))?;
    let result: FitResult = io::read_json(&fit_dir.join("result.json"))?;
    let truth = match &a.truth {
        Some(t) => truth_tree(t)?,
        None => None,
    };
    let truth_dir = a.truth.as_ref().filter(|t| t.is_dir());
    let labels_file = a
        .labels
        .clone()
        .or_else(|| truth_dir.and_then(|t| existing(t.join("labels.csv"))))
        .or_else(|| existing(fit_dir.join("labels.csv")));
    let labels = labels_file.as_deref().map(io::read_labels).transpose()?;
    if truth.is_none() && labels.is_none() {
        return Err(CliError::data("nothing to evaluate against: no truth.json and no labels"));
    }
    // linkage heights are not coalescent times, so only label metrics apply
    let truth = truth.filter(|_| result.settings.algorithm != "hc");
    if truth.is_none() && labels.is_none() {
        return Err(CliError::data("average-link fits can only be scored against labels"));
    }
    let report = evaluate(&result.trees, &result.weights, truth.as_ref(), labels.as_deref())?;
    io::write_json(&a.out.join("metrics.json"), &report)?;
    let mut csv = String::from("n_clusters,ari\n");
    for (k, ari) in report.ari_curve.iter().flatten() {
        csv.push_str(&format!("{k},{}\n", io::format_f64(*ari)));
    }
    io::write_string(&a.out.join("ari_curve.csv"), &csv)
}

fn find_metrics(dir: &Path, found: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_metrics(&p, found)?;
        } else if p.file_name().is_some_and(|f| f == "metrics.json") {
            found.push(p);
        }
    }
    Ok(())
}

/// Mean and sample standard deviation of every scalar metric found in
/// `metrics.json` files below `root`.
pub fn aggregate(root: &Path) -> CliResult<AggregateReport> {
    let mut files = Vec::new();
    find_metrics(root, &mut files)?;
    if files.is_empty() {
        return Err(CliError::data(format!("no metrics.json below {}", root.display())));
    }
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for f in &files {
        let v: Value = io::read_json(f)?;
        collect(&v, "", &mut values);
    }
    let metrics = values
        .into_iter()
        .map(|(k, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (k, Summary { mean, sd, count: xs.len() })
        })
        .collect();
    Ok(AggregateReport { files: files.len(), metrics })
}

fn collect(v: &Value, prefix: &str, out: &mut BTreeMap<String, Vec<f64>>) {
    if let Value::Object(map) = v {
        for (k, v) in map {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Number(x) => out.entry(key).or_default().extend(x.as_f64()),
                Value::Object(_) => collect(v, &key, out),
                _ => {}
            }
        }
    }
}

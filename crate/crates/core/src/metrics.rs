//! Tree comparison: log-domain merge-time and cophenetic-distance errors,
//! subtree purity, adjusted Rand index and the ARI curve over tree cuts.

use serde::{Deserialize, Serialize};

use crate::coalescent::Dendrogram;
use crate::error::{Error, Result};

/// Row-major `n × n` matrix of merge times of lowest common ancestors.
pub fn tree_distance_matrix(tree: &Dendrogram) -> Vec<f64> {
    let n = tree.n_leaves;
    let mut out = vec![0.0; n * n];
    let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in &tree.merges {
        for &i in &sets[m.left] {
            for &j in &sets[m.right] {
                out[i * n + j] = m.time;
                out[j * n + i] = m.time;
            }
        }
        let mut joined = std::mem::take(&mut sets[m.left]);
        joined.append(&mut std::mem::take(&mut sets[m.right]));
        sets.push(joined);
    }
    out
}

/// Strictly upper-triangular entries of a row-major `n × n` matrix.
pub fn off_diagonal(matrix: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(matrix[i * n + j]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub mse: f64,
    pub mae: f64,
    pub mab: f64,
}

/// Mean squared, mean absolute and maximum absolute log ratio.
pub fn error_triple(estimate: &[f64], truth: &[f64]) -> Result<ErrorTriple> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    if estimate.is_empty() {
        return Err(Error::Domain("error triple of empty input".into()));
    }
    let logs = estimate.iter().map(|v| positive_log(*v)).collect::<Result<Vec<_>>>()?;
    log_error_triple(&logs, truth)
}

/// As [`error_triple`] with the estimate already on the log scale.
pub fn log_error_triple(log_estimate: &[f64], truth: &[f64]) -> Result<ErrorTriple> {
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut max: f64 = 0.0;
    for (le, t) in log_estimate.iter().zip(truth) {
        let e = le - positive_log(*t)?;
        sq += e * e;
        abs += e.abs();
        max = max.max(e.abs());
    }
    let k = truth.len() as f64;
    Ok(ErrorTriple {
        mse: sq / k,
        mae: abs / k,
        mab: max,
    })
}

fn positive_log(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::Domain(format!("log-domain error needs positive entries, got {v}")))
    }
}

/// Weighted average of `log x` across particles, entry by entry.
fn weighted_log_mean(samples: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let k = samples[0].len();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; k];
    for (s, w) in samples.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(s) {
            *o += w / total * positive_log(*v)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeErrors {
    pub mse_t: f64,
    pub mae_t: f64,
    pub mab_t: f64,
    pub mse_pi: f64,
    pub mae_pi: f64,
    pub mab_pi: f64,
}

/// Errors of the weighted posterior against a true tree. Merge times and
/// off-diagonal cophenetic distances are averaged across particles on the
/// log scale before comparison.
pub fn tree_errors(trees: &[Dendrogram], weights: &[f64], truth: &Dendrogram) -> Result<TreeErrors> {
    if trees.is_empty() || trees.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: trees.len(),
            got: weights.len(),
        });
    }
    let n = truth.n_leaves;
    if trees.iter().any(|t| t.n_leaves != n) {
        return Err(Error::InvalidTree("trees disagree on leaf count".into()));
    }
    let times: Vec<Vec<f64>> = trees.iter().map(Dendrogram::times).collect();
    let dists: Vec<Vec<f64>> = trees
        .iter()
        .map(|t| off_diagonal(&tree_distance_matrix(t), n))
        .collect();
    let t = log_error_triple(&weighted_log_mean(&times, weights)?, &truth.times())?;
    let pi = log_error_triple(
        &weighted_log_mean(&dists, weights)?,
        &off_diagonal(&tree_distance_matrix(truth), n),
    )?;
    Ok(TreeErrors {
        mse_t: t.mse,
        mae_t: t.mae,
        mab_t: t.mab,
        mse_pi: pi.mse,
        mae_pi: pi.mae,
        mab_pi: pi.mab,
    })
}

fn check_labels(tree: &Dendrogram, labels: &[usize]) -> Result<()> {
    if labels.len() != tree.n_leaves {
        return Err(Error::DimensionMismatch {
            expected: tree.n_leaves,
            got: labels.len(),
        });
    }
    Ok(())
}

fn distinct(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

/// Fraction of label-pure internal nodes, `N_pure / (n - C)`.
pub fn subtree_score(tree: &Dendrogram, labels: &[usize]) -> Result<f64> {
    check_labels(tree, labels)?;
    let n = tree.n_leaves;
    let classes = distinct(labels);
    if classes >= n {
        return Err(Error::Domain("subtree score needs fewer classes than leaves".into()));
    }
    // class of each node, None once mixed
    let mut class: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
    let mut pure = 0usize;
    for m in &tree.merges {
        let c = match (class[m.left], class[m.right]) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        };
        if c.is_some() {
            pure += 1;
        }
        class.push(c);
    }
    Ok(pure as f64 / (n - classes) as f64)
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. When the index is undefined (both
/// partitions trivial in the same way) it is 1 for identical partitions
/// and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let relabel = |x: &[usize]| -> Vec<usize> {
        let mut seen = std::collections::HashMap::new();
        x.iter()
            .map(|v| {
                let next = seen.len();
                *seen.entry(*v).or_insert(next)
            })
            .collect()
    };
    let (ra, rb) = (relabel(a), relabel(b));
    let (ka, kb) = (
        ra.iter().max().map_or(0, |m| m + 1),
        rb.iter().max().map_or(0, |m| m + 1),
    );
    let mut table = vec![0usize; ka * kb];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in ra.iter().zip(&rb) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(a.len());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return if ra == rb { 1.0 } else { 0.0 };
    }
    (index - expected) / denom
}

/// Labels each cluster of `assignment` with its majority true label
/// (smallest label on ties) and returns the induced labelling.
pub fn majority_labels(assignment: &[usize], labels: &[usize]) -> Vec<usize> {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut counts: Vec<std::collections::BTreeMap<usize, usize>> = vec![Default::default(); k];
    for (&c, &l) in assignment.iter().zip(labels) {
        *counts[c].entry(l).or_insert(0) += 1;
    }
    let winners: Vec<usize> = counts
        .iter()
        .map(|m| {
            // BTreeMap iterates labels ascending, so the first maximum wins
            let mut best = (0usize, 0usize);
            for (&label, &c) in m {
                if c > best.1 {
                    best = (label, c);
                }
            }
            best.0
        })
        .collect();
    assignment.iter().map(|&c| winners[c]).collect()
}

/// ARI of the majority-vote labelling at every cut `N_c = 1..n`, and the
/// trapezoidal area under it with `x = (N_c - 1)/(n - 1)`.
pub fn ari_curve_auc(tree: &Dendrogram, labels: &[usize]) -> Result<(Vec<(usize, f64)>, f64)> {
    check_labels(tree, labels)?;
    let n = tree.n_leaves;
    let curve: Vec<(usize, f64)> = (1..=n)
        .map(|c| {
            let induced = majority_labels(&tree.cut(c), labels);
            (c, adjusted_rand_index(&induced, labels))
        })
        .collect();
    let auc = if n < 2 {
        1.0
    } else {
        let h = 1.0 / (n - 1) as f64;
        curve.windows(2).map(|w| 0.5 * h * (w[0].1 + w[1].1)).sum()
    };
    Ok((curve, auc))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Errors of the weighted posterior against the true tree.
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub errors: Option<TreeErrors>,
    /// The same errors for the max-weight particle alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight_errors: Option<TreeErrors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtree_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ari_curve: Option<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

/// Builds a report. Tree errors need `truth`; label metrics need `labels`
/// and use the max-weight tree.
pub fn evaluate(
    trees: &[Dendrogram],
    weights: &[f64],
    truth: Option<&Dendrogram>,
    labels: Option<&[usize]>,
) -> Result<MetricsReport> {
    if trees.is_empty() || trees.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: trees.len(),
            got: weights.len(),
        });
    }
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    let mut report = MetricsReport::default();
    if let Some(truth) = truth {
        report.errors = Some(tree_errors(trees, weights, truth)?);
        report.max_weight_errors = Some(tree_errors(&trees[best..=best], &[1.0], truth)?);
    }
    if let Some(labels) = labels {
        let tree = &trees[best];
        if distinct(labels) < tree.n_leaves {
            report.subtree_score = Some(subtree_score(tree, labels)?);
        }
        let (curve, auc) = ari_curve_auc(tree, labels)?;
        report.ari_curve = Some(curve);
        report.auc = Some(auc);
    }
    Ok(report)
}

//! Gaussian message passing up a dendrogram.
//!
//! Each node carries a Gaussian message `N(m, s Φ)` for its latent value.
//! Merging two children at time `t_k` inflates each child's variance by the
//! elapsed branch length, multiplies the two Gaussians and yields the
//! normalizer `Z_k`. The likelihood of a tree is `Σ_k log Z_k`.

use std::f64::consts::PI;

use crate::coalescent::{log_prior, Dendrogram};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::CovarianceModel;

/// Lower bound applied to each inflated child variance `s̃`.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMessage {
    pub mean: Vec<f64>,
    pub variance: f64,
    pub created_at: f64,
    pub members: Vec<usize>,
}

impl NodeMessage {
    pub fn leaf(index: usize, row: &[f64]) -> Self {
        NodeMessage {
            mean: row.to_vec(),
            variance: 0.0,
            created_at: 0.0,
            members: vec![index],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub message: NodeMessage,
    pub log_z: f64,
    pub v: f64,
    pub r: f64,
    pub eps: f64,
}

/// `2 t_prev - t_c1 - t_c2 + s_c1 + s_c2`: the part of `v_k = 2Δ_k + r_k`
/// that does not depend on the new waiting time.
pub fn compute_r(c1: &NodeMessage, c2: &NodeMessage, t_prev: f64) -> Result<f64> {
    for c in [c1, c2] {
        if t_prev < c.created_at {
            return Err(Error::Convention {
                t_prev,
                created_at: c.created_at,
            });
        }
    }
    Ok(r_from_parts(
        t_prev,
        c1.created_at + c2.created_at - c1.variance - c2.variance,
    ))
}

/// `r` from a cached `t_c1 + t_c2 - s_c1 - s_c2`.
#[inline]
pub fn r_from_parts(t_prev: f64, const_part: f64) -> f64 {
    (2.0 * t_prev - const_part).max(0.0)
}

/// `log Z` for a merge with squared Mahalanobis distance `eps`, total
/// variance scale `v` and `log|Φ|`.
#[inline]
pub fn log_z(eps: f64, v: f64, d: usize, log_det: f64) -> f64 {
    let df = d as f64;
    -0.5 * df * (2.0 * PI).ln() - 0.5 * (df * v.ln() + log_det) - eps / (2.0 * v)
}

/// Inflated child variances `(s̃_1, s̃_2)` at merge time `t_k`, each floored.
#[inline]
pub fn inflated_variances(
    t_k: f64,
    created: (f64, f64),
    variance: (f64, f64),
) -> (f64, f64) {
    (
        (t_k - created.0 + variance.0).max(VARIANCE_FLOOR),
        (t_k - created.1 + variance.1).max(VARIANCE_FLOOR),
    )
}

/// Precision-weighted combination of two means with inflated variances
/// `a` and `b`; returns the merged variance and writes the mean to `out`.
#[inline]
pub fn combine_means(m1: &[f64], m2: &[f64], a: f64, b: f64, out: &mut [f64]) -> f64 {
    let v = a + b;
    let (w1, w2) = (b / v, a / v);
    for ((o, x), y) in out.iter_mut().zip(m1).zip(m2) {
        *o = w1 * x + w2 * y;
    }
    a * b / v
}

/// Merges two child messages at `t_k`, the previous merge having happened
/// at `t_prev`.
pub fn merge_message(
    c1: &NodeMessage,
    c2: &NodeMessage,
    t_prev: f64,
    t_k: f64,
    cov: &CovarianceModel,
) -> Result<MergeResult> {
    let r = compute_r(c1, c2, t_prev)?;
    if t_k < t_prev {
        return Err(Error::Convention {
            t_prev,
            created_at: t_k,
        });
    }
    if c1.members.iter().any(|m| c2.members.contains(m)) {
        return Err(Error::DegenerateMerge("children share leaves".into()));
    }
    let delta: Vec<f64> = c1.mean.iter().zip(&c2.mean).map(|(a, b)| a - b).collect();
    let eps = cov.quad_form(&delta)?;
    let (a, b) = inflated_variances(
        t_k,
        (c1.created_at, c2.created_at),
        (c1.variance, c2.variance),
    );
    let v = a + b;
    let mut mean = vec![0.0; c1.mean.len()];
    let variance = combine_means(&c1.mean, &c2.mean, a, b, &mut mean);
    let mut members = [c1.members.as_slice(), c2.members.as_slice()].concat();
    members.sort_unstable();
    Ok(MergeResult {
        message: NodeMessage {
            mean,
            variance,
            created_at: t_k,
            members,
        },
        log_z: log_z(eps, v, cov.dim(), cov.log_det()),
        v,
        r,
        eps,
    })
}

/// Per-merge `log Z_k` for `tree`, replayed in whitened coordinates.
pub fn merge_log_zs(data: &Dataset, tree: &Dendrogram, cov: &CovarianceModel) -> Result<Vec<f64>> {
    let n = data.n();
    let d = data.d();
    if tree.n_leaves != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: tree.n_leaves,
        });
    }
    if cov.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov.dim(),
        });
    }
    tree.validate()?;
    let nodes = 2 * n - 1;
    let mut w = vec![0.0; nodes * d];
    let mut s = vec![0.0; nodes];
    let mut t = vec![0.0; nodes];
    for i in 0..n {
        cov.whiten_into(data.row(i), &mut w[i * d..(i + 1) * d]);
    }
    let log_det = cov.log_det();
    let mut out = Vec::with_capacity(n - 1);
    for (k, m) in tree.merges.iter().enumerate() {
        let id = n + k;
        let (a, b) = inflated_variances(m.time, (t[m.left], t[m.right]), (s[m.left], s[m.right]));
        let (head, tail) = w.split_at_mut(id * d);
        let w1 = &head[m.left * d..(m.left + 1) * d];
        let w2 = &head[m.right * d..(m.right + 1) * d];
        let eps: f64 = w1.iter().zip(w2).map(|(x, y)| (x - y) * (x - y)).sum();
        s[id] = combine_means(w1, w2, a, b, &mut tail[..d]);
        t[id] = m.time;
        out.push(log_z(eps, a + b, d, log_det));
    }
    Ok(out)
}

/// `log p(X | t, π) = Σ_k log Z_k`.
pub fn tree_log_likelihood(data: &Dataset, tree: &Dendrogram, cov: &CovarianceModel) -> Result<f64> {
    Ok(merge_log_zs(data, tree, cov)?.iter().sum())
}

/// Prior plus likelihood.
pub fn joint_log_density(data: &Dataset, tree: &Dendrogram, cov: &CovarianceModel) -> Result<f64> {
    Ok(log_prior(tree)? + tree_log_likelihood(data, tree, cov)?)
}

//! Per-pair merge weights and greedy waiting times.
//!
//! All weights are logs of `∫ exp(-λΔ) Z(Δ) dΔ` up to the pair-independent
//! constant [`weight_constant`], with `v = 2Δ + r` and the integral taken
//! over `v ∈ (0, ∞)` unless stated otherwise.

use std::f64::consts::PI;

use crate::error::Result;
use crate::special_math::{log_bessel_k, quadrature::log_integrate_unimodal};
use crate::tree_model::log_z;

/// Floor applied to `ε` so that coincident subtrees keep a finite,
/// dominating weight.
pub const EPS_FLOOR: f64 = 1e-300;

/// GIG order `1 - d/2` of the waiting-time law in `d` dimensions.
#[inline]
pub fn gig_order(d: usize) -> f64 {
    1.0 - d as f64 / 2.0
}

/// Pair-independent part of every weight: `-(d/2) log 2π - ½ log|Φ|`.
#[inline]
pub fn weight_constant(d: usize, log_det: f64) -> f64 {
    -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * log_det
}

/// `log K_ν(√(λε)) - (ν/2)(log λ - log ε) + λr/2` with `ν = 1 - d/2`.
pub fn pair_log_weight_exact(eps: f64, r: f64, lambda: f64, d: usize) -> Result<f64> {
    let eps = eps.max(EPS_FLOOR);
    let nu = gig_order(d);
    let k = log_bessel_k(nu, (lambda * eps).sqrt())?;
    Ok(k - 0.5 * nu * (lambda.ln() - eps.ln()) + 0.5 * lambda * r)
}

/// Large-argument form of [`pair_log_weight_exact`], constants included,
/// so that it coincides with the exact weight for `d = 1`.
pub fn pair_log_weight_laplace(eps: f64, r: f64, lambda: f64, d: usize) -> f64 {
    let eps = eps.max(EPS_FLOOR);
    let df = d as f64;
    0.5 * (PI / 2.0).ln() + 0.25 * (df - 3.0) * lambda.ln() - 0.25 * (df - 1.0) * eps.ln()
        - (lambda * eps).sqrt()
        + 0.5 * lambda * r
}

/// Rate-free part of the fast weight, computed once per pair:
/// `log K_ν(√ε) + (ν/2) log ε`.
pub fn fast_log_core(eps: f64, d: usize) -> Result<f64> {
    let eps = eps.max(EPS_FLOOR);
    let nu = gig_order(d);
    Ok(log_bessel_k(nu, eps.sqrt())? + 0.5 * nu * eps.ln())
}

/// Fast weight from a cached core: one multiply-add per pair and stage.
#[inline]
pub fn pair_log_weight_fast(log_core: f64, r: f64, lambda: f64) -> f64 {
    log_core + 0.5 * lambda * r
}

/// `log ∫ exp(-λΔ) Z(Δ) dΔ` by adaptive quadrature, constants included.
/// With `truncated` the integral runs over `Δ > 0` (the normalizer of the
/// law actually sampled); otherwise over `v > 0` like the closed forms.
pub fn pair_log_weight_quadrature(
    eps: f64,
    r: f64,
    lambda: f64,
    d: usize,
    log_det: f64,
    truncated: bool,
) -> f64 {
    let eps = eps.max(EPS_FLOOR);
    let nu = gig_order(d);
    // integrate over u = log v; dΔ = e^u du / 2
    let g = |u: f64| {
        let v = u.exp();
        -lambda * (v - r) / 2.0 + log_z(eps, v, d, log_det) + u - std::f64::consts::LN_2
    };
    let disc = (nu * nu + eps * lambda).sqrt();
    let peak_v = if nu >= 0.0 { (nu + disc) / lambda } else { eps / (disc - nu) };
    let curvature = 0.5 * eps / peak_v + 0.5 * lambda * peak_v;
    let width = (1.0 / curvature).sqrt().clamp(1e-6, 10.0);
    let lo = if truncated && r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
    let mode = peak_v.ln().max(lo);
    log_integrate_unimodal(g, lo, f64::INFINITY, mode, width)
}

/// Which closed-form waiting-time mode the greedy fitter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyFormula {
    /// `(ν + √(ν² + λε)) / (2λ) - r/2`.
    Corrected,
    /// `(-d + √(d² + 2λε)) / (2λ) - r/2`.
    Original,
    /// Mode of the GIG law itself: `ν` replaced by `ν - 1`.
    Textbook,
}

pub fn greedy_delta_corrected(eps: f64, r: f64, lambda: f64, d: usize) -> f64 {
    let nu = gig_order(d);
    positive_root(nu, lambda * eps) / (2.0 * lambda) - 0.5 * r
}

pub fn greedy_delta_original(eps: f64, r: f64, lambda: f64, d: usize) -> f64 {
    let df = d as f64;
    positive_root(-df, 2.0 * lambda * eps) / (2.0 * lambda) - 0.5 * r
}

pub fn greedy_delta_textbook(eps: f64, r: f64, lambda: f64, d: usize) -> f64 {
    let nu = gig_order(d) - 1.0;
    positive_root(nu, lambda * eps) / (2.0 * lambda) - 0.5 * r
}

pub fn greedy_delta(formula: GreedyFormula, eps: f64, r: f64, lambda: f64, d: usize) -> f64 {
    match formula {
        GreedyFormula::Corrected => greedy_delta_corrected(eps, r, lambda, d),
        GreedyFormula::Original => greedy_delta_original(eps, r, lambda, d),
        GreedyFormula::Textbook => greedy_delta_textbook(eps, r, lambda, d),
    }
}

/// `a + √(a² + c)` for `c ≥ 0`, rewritten as `c / (√(a² + c) - a)` when
/// `a < 0` to avoid cancellation.
fn positive_root(a: f64, c: f64) -> f64 {
    let disc = (a * a + c).sqrt();
    if a >= 0.0 {
        a + disc
    } else if c == 0.0 {
        0.0
    } else {
        c / (disc - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_equals_exact_at_unit_rate() {
        for d in [1, 2, 5, 32] {
            for eps in [1e-3, 0.7, 40.0] {
                let exact = pair_log_weight_exact(eps, 0.3, 1.0, d).unwrap();
                let fast = pair_log_weight_fast(fast_log_core(eps, d).unwrap(), 0.3, 1.0);
                assert!((exact - fast).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplace_is_exact_in_one_dimension() {
        for (eps, lambda) in [(0.01, 1.0), (2.0, 6.0), (30.0, 496.0)] {
            let a = pair_log_weight_exact(eps, 0.2, lambda, 1).unwrap();
            let b = pair_log_weight_laplace(eps, 0.2, lambda, 1);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn greedy_formulas_meet_at_crossing_point() {
        for d in [1, 2, 7, 64] {
            let lambda = 3.0;
            let eps = 4.0 * (d as f64 + 2.0) / lambda;
            let a = greedy_delta_corrected(eps, 0.1, lambda, d);
            let b = greedy_delta_original(eps, 0.1, lambda, d);
            assert!((a - b).abs() < 1e-12);
            assert!((a - (2.0 / lambda - 0.05)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_corrected_form() {
        let (eps, r, lambda): (f64, f64, f64) = (3.0, 0.4, 6.0);
        let expected = (eps / lambda).sqrt() / 2.0 - r / 2.0;
        assert!((greedy_delta_corrected(eps, r, lambda, 2) - expected).abs() < 1e-15);
        assert_eq!(greedy_delta_corrected(0.0, r, lambda, 2), -r / 2.0);
    }

    #[test]
    fn quadrature_matches_closed_form_without_truncation() {
        for d in [1, 2, 4] {
            let (eps, lambda) = (1.3, 3.0);
            let q = pair_log_weight_quadrature(eps, 0.0, lambda, d, 0.0, true);
            let w = pair_log_weight_exact(eps, 0.0, lambda, d).unwrap() + weight_constant(d, 0.0);
            assert!((q - w).abs() < 1e-9, "d={d}: {q} vs {w}");
            let u = pair_log_weight_quadrature(eps, 0.8, lambda, d, 0.0, false);
            let w = pair_log_weight_exact(eps, 0.8, lambda, d).unwrap() + weight_constant(d, 0.0);
            assert!((u - w).abs() < 1e-9, "d={d}: {u} vs {w}");
            let t = pair_log_weight_quadrature(eps, 0.8, lambda, d, 0.0, true);
            assert!(t < u);
        }
    }
}

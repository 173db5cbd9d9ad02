//! Numerically robust special functions.
//!
//! Everything here works in the log domain: Bessel functions of large order
//! at tiny arguments overflow `f64` long before the samplers stop needing
//! them.

mod bessel;
mod gig;
pub mod quadrature;
mod slice;

pub use bessel::log_bessel_k;
pub use gig::{
    gig_log_density, gig_slice_sample, gig_slice_sample_with, GigParams, DEFAULT_SLICE_SWEEPS,
    WINDOW_FLOOR,
};
pub use slice::{slice_step, SliceOptions};

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum(exp(x)))`; negative infinity for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

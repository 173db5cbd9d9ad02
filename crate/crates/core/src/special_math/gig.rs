use rand::Rng;

use super::bessel::log_bessel_k;
use super::quadrature::log_integrate_unimodal;
use super::slice::{slice_step, SliceOptions};
use crate::error::{Error, Result};

/// Floor replacing a zero scale when sizing the slice window.
pub const WINDOW_FLOOR: f64 = 1e-8;

/// Slice updates run per draw, starting from the mode of the truncated
/// density on the log scale.
pub const DEFAULT_SLICE_SWEEPS: usize = 12;

/// Generalized inverse Gaussian law with density proportional to
/// `v^{order-1} exp(-chi/(2v) - psi v / 2)`, optionally truncated to
/// `v > lower_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub order: f64,
    pub chi: f64,
    pub psi: f64,
    pub lower_bound: f64,
}

impl GigParams {
    pub fn new(order: f64, chi: f64, psi: f64, lower_bound: f64) -> Result<Self> {
        let p = Self {
            order,
            chi,
            psi,
            lower_bound,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.order.is_finite() {
            return Err(Error::Domain(format!("GIG order {} not finite", self.order)));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::Domain(format!("GIG chi must be positive, got {}", self.chi)));
        }
        if !(self.psi > 0.0 && self.psi.is_finite()) {
            return Err(Error::Domain(format!("GIG psi must be positive, got {}", self.psi)));
        }
        if !(self.lower_bound >= 0.0 && self.lower_bound.is_finite()) {
            return Err(Error::Domain(format!(
                "GIG lower bound must be nonnegative, got {}",
                self.lower_bound
            )));
        }
        Ok(())
    }

    /// Unnormalised log density at `v > 0`.
    pub fn log_kernel(&self, v: f64) -> f64 {
        (self.order - 1.0) * v.ln() - 0.5 * self.chi / v - 0.5 * self.psi * v
    }

    /// Log density of `u = log v`, up to the same constant as [`Self::log_kernel`].
    fn log_kernel_log_scale(&self, u: f64) -> f64 {
        self.order * u - 0.5 * self.chi * (-u).exp() - 0.5 * self.psi * u.exp()
    }

    /// `log ∫_0^∞ v^{order-1} exp(-chi/(2v) - psi v/2) dv`
    /// `= log 2 + log K_order(sqrt(chi psi)) + (order/2) log(chi/psi)`.
    pub fn log_normalizer(&self) -> Result<f64> {
        let omega = (self.chi * self.psi).sqrt();
        Ok(std::f64::consts::LN_2
            + log_bessel_k(self.order, omega)?
            + 0.5 * self.order * (self.chi / self.psi).ln())
    }

    /// Log of the untruncated probability mass above `lower_bound`.
    pub fn log_tail_mass(&self) -> Result<f64> {
        if self.lower_bound == 0.0 {
            return Ok(0.0);
        }
        let lo = self.lower_bound.ln();
        let mode = self.log_scale_mode().max(lo);
        let tail = log_integrate_unimodal(
            |u| self.log_kernel_log_scale(u),
            lo,
            f64::INFINITY,
            mode,
            self.log_scale_width(),
        );
        Ok((tail - self.log_normalizer()?).min(0.0))
    }

    /// Mode of the untruncated density in `v`.
    pub fn mode(&self) -> f64 {
        stable_root(self.order - 1.0, self.chi, self.psi)
    }

    /// Mode of the untruncated density of `log v`.
    pub fn log_scale_mode(&self) -> f64 {
        stable_root(self.order, self.chi, self.psi).ln()
    }

    /// Rough spread of `log v`, from the curvature at the log-scale mode.
    fn log_scale_width(&self) -> f64 {
        let m = stable_root(self.order, self.chi, self.psi);
        let curvature = 0.5 * self.chi / m + 0.5 * self.psi * m;
        (1.0 / curvature.max(1e-300)).sqrt().clamp(1e-6, 10.0)
    }

    /// Mean of the untruncated law, `sqrt(chi/psi) K_{order+1}(ω) / K_order(ω)`.
    pub fn mean(&self) -> Result<f64> {
        let omega = (self.chi * self.psi).sqrt();
        let ratio = log_bessel_k(self.order + 1.0, omega)? - log_bessel_k(self.order, omega)?;
        Ok((self.chi / self.psi).sqrt() * ratio.exp())
    }

    /// Variance of the untruncated law.
    pub fn variance(&self) -> Result<f64> {
        let omega = (self.chi * self.psi).sqrt();
        let k0 = log_bessel_k(self.order, omega)?;
        let r1 = (log_bessel_k(self.order + 1.0, omega)? - k0).exp();
        let r2 = (log_bessel_k(self.order + 2.0, omega)? - k0).exp();
        Ok(self.chi / self.psi * (r2 - r1 * r1))
    }
}

/// Positive root of `psi x^2 - 2 a x - chi = 0`, i.e.
/// `(a + sqrt(a^2 + chi psi)) / psi`, without cancellation for `a < 0`.
fn stable_root(a: f64, chi: f64, psi: f64) -> f64 {
    let disc = (a * a + chi * psi).sqrt();
    if a >= 0.0 {
        (a + disc) / psi
    } else {
        chi / (disc - a)
    }
}

/// Log density of the truncated GIG at `v`: the untruncated log density
/// minus the log tail mass above `lower_bound`. Negative infinity outside
/// the support.
pub fn gig_log_density(params: &GigParams, v: f64) -> Result<f64> {
    params.validate()?;
    if v.is_nan() || v <= params.lower_bound || v <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(params.log_kernel(v) - params.log_normalizer()? - params.log_tail_mass()?)
}

/// Draws `Δ = (v - lower_bound) / 2` with `v` from the truncated GIG, using
/// [`DEFAULT_SLICE_SWEEPS`] slice updates.
pub fn gig_slice_sample<R: Rng + ?Sized>(
    params: &GigParams,
    rng: &mut R,
    window_factor: f64,
) -> Result<f64> {
    gig_slice_sample_with(params, rng, window_factor, DEFAULT_SLICE_SWEEPS)
}

/// As [`gig_slice_sample`] with an explicit number of slice updates.
///
/// The chain runs on `log v`, where the (truncated) GIG is log-concave,
/// starting at the truncated log-scale mode. `Δ` is confined to
/// `(0, window_factor * scale / 2)` where `scale` is the largest of the
/// lower bound, the untruncated mean and [`WINDOW_FLOOR`].
pub fn gig_slice_sample_with<R: Rng + ?Sized>(
    params: &GigParams,
    rng: &mut R,
    window_factor: f64,
    sweeps: usize,
) -> Result<f64> {
    params.validate()?;
    if !(window_factor > 0.0 && window_factor.is_finite()) {
        return Err(Error::Domain(format!(
            "window factor must be positive, got {window_factor}"
        )));
    }
    let lb = params.lower_bound;
    let scale = lb.max(params.mean()?).max(WINDOW_FLOOR);
    let window = window_factor * scale / 2.0;
    let hi = (lb + 2.0 * window).ln();
    let lo = if lb > 0.0 { lb.ln() } else { f64::NEG_INFINITY };

    let mode = params.log_scale_mode();
    let mut u = if mode > lo && mode < hi {
        mode
    } else if mode >= hi {
        hi - 1e-9 * hi.abs().max(1.0)
    } else {
        // Truncated density is decreasing on the log scale: start just
        // inside the lower edge.
        let span = (hi - lo).min(1.0);
        lo + 1e-6 * span
    };
    let opts = SliceOptions {
        width: params.log_scale_width(),
        ..SliceOptions::default()
    };
    for _ in 0..sweeps.max(1) {
        u = slice_step(u, |x| params.log_kernel_log_scale(x), lo, hi, &opts, rng)?;
    }
    Ok(((u.exp() - lb) / 2.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_example() {
        let p = GigParams::new(0.5, 1.0, 1.0, 0.0).unwrap();
        let expected = (-0.5 + 1.25f64.sqrt()) / 1.0;
        assert!((p.mode() - expected).abs() < 1e-15);
        assert!((p.mode() - 0.618).abs() < 1e-3);
    }

    #[test]
    fn outside_support_is_neg_infinity() {
        let p = GigParams::new(0.5, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(gig_log_density(&p, 1.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(gig_log_density(&p, 2.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GigParams::new(0.5, 0.0, 1.0, 0.0).is_err());
        assert!(GigParams::new(0.5, 1.0, -1.0, 0.0).is_err());
        assert!(GigParams::new(0.5, 1.0, 1.0, -0.1).is_err());
        assert!(GigParams::new(f64::NAN, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn inverse_gaussian_mean() {
        // order -1/2 is the inverse Gaussian with mean sqrt(chi/psi).
        let p = GigParams::new(-0.5, 4.0, 1.0, 0.0).unwrap();
        assert!((p.mean().unwrap() - 2.0).abs() < 1e-12);
    }
}

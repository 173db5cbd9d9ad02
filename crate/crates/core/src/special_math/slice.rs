use rand::Rng;

use crate::error::{Error, Result};

/// Tuning for [`slice_step`].
#[derive(Debug, Clone, Copy)]
pub struct SliceOptions {
    /// Initial bracket width for stepping out.
    pub width: f64,
    /// Total step-out budget, split randomly between the two sides.
    pub max_step_out: usize,
    pub max_shrink: usize,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_step_out: 64,
            max_shrink: 64,
        }
    }
}

/// One univariate slice-sampling update (stepping out, then shrinkage)
/// of `x0` under the log density `log_f`, restricted to `(lo, hi)`.
///
/// `log_f(x0)` must be finite. Fails if shrinkage exhausts its budget or
/// collapses the bracket to machine precision, which only happens for a
/// pathological target.
pub fn slice_step<R, F>(
    x0: f64,
    mut log_f: F,
    lo: f64,
    hi: f64,
    opts: &SliceOptions,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let f0 = log_f(x0);
    if !f0.is_finite() {
        return Err(Error::SamplerFailure(format!(
            "log density not finite at starting point {x0}"
        )));
    }
    // log(U) for U ~ Uniform(0, 1]
    let level = f0 + (1.0 - rng.random::<f64>()).ln();

    let w = opts.width;
    let mut left = x0 - rng.random::<f64>() * w;
    let mut right = left + w;
    let mut j = (rng.random::<f64>() * opts.max_step_out as f64).floor() as usize;
    let mut k = opts.max_step_out.saturating_sub(1).saturating_sub(j);
    while j > 0 && left > lo && log_f(left) > level {
        left -= w;
        j -= 1;
    }
    while k > 0 && right < hi && log_f(right) > level {
        right += w;
        k -= 1;
    }
    left = left.max(lo);
    right = right.min(hi);

    for _ in 0..opts.max_shrink {
        let x1 = left + rng.random::<f64>() * (right - left);
        if x1 > lo && x1 < hi && log_f(x1) > level {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left <= f64::EPSILON * x0.abs().max(1.0) {
            break;
        }
    }
    Err(Error::SamplerFailure(format!(
        "slice collapsed around {x0} (bracket [{left}, {right}])"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = SliceOptions::default();
        let mut x = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let n = 50_000;
        for _ in 0..n {
            x = slice_step(x, |v| -0.5 * v * v, f64::NEG_INFINITY, f64::INFINITY, &opts, &mut rng)
                .unwrap();
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.04, "{var}");
    }

    #[test]
    fn respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let opts = SliceOptions::default();
        let mut x = 0.5;
        for _ in 0..5000 {
            x = slice_step(x, |v| -v, 0.0, 2.0, &opts, &mut rng).unwrap();
            assert!(x > 0.0 && x < 2.0);
        }
    }
}

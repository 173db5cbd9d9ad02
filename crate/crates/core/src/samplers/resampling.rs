use rand::Rng;

use crate::special_math::log_sum_exp;

/// `(Σw)² / Σw²` for weights given on the log scale.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return 0.0;
    }
    let sq: f64 = log_weights.iter().map(|w| (2.0 * (w - lse)).exp()).sum();
    1.0 / sq
}

/// Systematic resampling: one uniform offset, `m` evenly spaced pointers.
/// Returns ancestor indices in nondecreasing order.
pub fn systematic_resample<R: Rng + ?Sized>(log_weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let lse = log_sum_exp(log_weights);
    let probs: Vec<f64> = log_weights.iter().map(|w| (w - lse).exp()).collect();
    let u0: f64 = rng.random::<f64>() / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut cum = probs[0];
    let mut i = 0;
    for k in 0..m {
        let u = u0 + k as f64 / m as f64;
        while u > cum && i + 1 < probs.len() {
            i += 1;
            cum += probs[i];
        }
        out.push(i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ess_bounds() {
        assert!((effective_sample_size(&[0.0; 10]) - 10.0).abs() < 1e-12);
        assert!((effective_sample_size(&[0.0, -1e6, -1e6]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_copy_one_ancestor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = systematic_resample(&[-1e9, 0.0, -1e9], 5, &mut rng);
        assert_eq!(idx, vec![1; 5]);
    }

    #[test]
    fn counts_within_one_of_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = [0.1f64, 0.2, 0.3, 0.4];
        let lw: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        for _ in 0..100 {
            let idx = systematic_resample(&lw, 20, &mut rng);
            for (j, p) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&i| i == j).count() as f64;
                assert!((c - 20.0 * p).abs() <= 1.0 + 1e-9);
            }
        }
    }
}

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Above this argument the base order is evaluated from the large-argument
/// asymptotic expansion; below it from Steed's continued fraction (z > 2) or
/// Temme's series (z <= 2).
const ASYMPTOTIC_SWITCH: f64 = 50.0;

/// Taylor coefficients of `1/Γ(1+x)` around zero.
#[allow(clippy::excessive_precision)]
const RGAMMA_TAYLOR: [f64; 30] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
    -2.298_745_684_435_370_206_6e-19,
    1.714_406_321_927_337_433_4e-20,
];

/// `log K_ν(z)` for the modified Bessel function of the second kind.
///
/// Negative orders are folded onto `|ν|` (`K_{-ν} = K_ν`). The fractional
/// base order `μ ∈ [-1/2, 1/2)` is evaluated directly and the result is
/// carried up to `|ν|` by the forward recurrence on the ratio
/// `K_{μ+1}/K_μ`, which is stable for this function and never leaves the
/// log domain.
pub fn log_bessel_k(order: f64, z: f64) -> Result<f64> {
    if !order.is_finite() {
        return Err(Error::Domain(format!("Bessel order must be finite, got {order}")));
    }
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Domain(format!("Bessel argument must be positive, got {z}")));
    }
    if z.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let nu = order.abs();
    let steps = (nu + 0.5).floor();
    let mu = nu - steps;
    let (mut lk, mut lk1) = if z <= 2.0 {
        temme(mu, z)
    } else if z <= ASYMPTOTIC_SWITCH {
        steed(mu, z)
    } else {
        (asymptotic(mu, z), asymptotic(mu + 1.0, z))
    };
    for i in 0..steps as usize {
        let a = 2.0 * (mu + i as f64 + 1.0) / z;
        let next = lk1 + (a + (lk - lk1).exp()).ln();
        lk = lk1;
        lk1 = next;
    }
    Ok(lk)
}

/// `(1/Γ(1+μ), 1/Γ(1-μ), γ1, γ2)` as used by Temme's series, with
/// `γ1 = (1/Γ(1-μ) - 1/Γ(1+μ)) / 2μ` and `γ2 = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2`.
fn gamma_parts(mu: f64) -> (f64, f64, f64, f64) {
    let mut gampl = 0.0;
    let mut gammi = 0.0;
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let mut prev = 0.0;
    let mut pow = 1.0;
    for (k, c) in RGAMMA_TAYLOR.iter().enumerate() {
        let term = c * pow;
        gampl += term;
        if k % 2 == 0 {
            gammi += term;
            gam2 += term;
        } else {
            gammi -= term;
            gam1 -= c * prev;
        }
        prev = pow;
        pow *= mu;
    }
    (gampl, gammi, gam1, gam2)
}

/// Temme's series for `0 < z <= 2`, `|μ| <= 1/2`, returning
/// `(log K_μ, log K_{μ+1})`. All running quantities are scaled by
/// `exp(-|μ log(z/2)|)` so tiny arguments cannot overflow.
fn temme(mu: f64, z: f64) -> (f64, f64) {
    let x2 = 0.5 * z;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let dlog = -x2.ln();
    let e = mu * dlog;
    let ae = e.abs();
    let damp = (-2.0 * ae).exp();
    let fact2 = if ae < EPS { 1.0 } else { (1.0 - damp) / (2.0 * ae) };
    let cosh_s = 0.5 * (1.0 + damp);
    let (gampl, gammi, gam1, gam2) = gamma_parts(mu);
    let mut ff = fact * (gam1 * cosh_s + gam2 * fact2 * dlog);
    let mut sum = ff;
    let mut p = 0.5 * (e - ae).exp() / gampl;
    let mut q = 0.5 * (-e - ae).exp() / gammi;
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() + ae, sum1.ln() + ae + (2.0 / z).ln())
}

/// Steed's continued fraction (CF2) for `z > 2`, `|μ| <= 1/2`.
fn steed(mu: f64, z: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let lk = 0.5 * (PI / (2.0 * z)).ln() - z - s.ln();
    let lk1 = lk + ((mu + z + 0.5 - h) / z).ln();
    (lk, lk1)
}

/// Large-argument expansion
/// `K_ν(z) ~ sqrt(π/2z) e^{-z} Σ_k a_k(ν) / z^k`, summed to convergence.
fn asymptotic(nu: f64, z: f64) -> f64 {
    let m = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        term *= (m - odd * odd) / (k as f64 * 8.0 * z);
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    0.5 * (PI / (2.0 * z)).ln() - z + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_closed_form() {
        let v = log_bessel_k(0.5, 1.0).unwrap();
        let expected = 0.5 * (PI / 2.0).ln() - 1.0;
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
        assert!((v - -0.774_208).abs() < 1e-6);
    }

    #[test]
    fn half_integer_matches_asymptote_everywhere() {
        for &z in &[1e-3, 0.3, 1.9, 2.1, 10.0, 49.0, 51.0, 300.0, 1e4] {
            let v = log_bessel_k(0.5, z).unwrap();
            let asym = 0.5 * (PI / (2.0 * z)).ln() - z;
            assert!((v - asym).abs() < 1e-13, "z={z}: {v} vs {asym}");
        }
    }

    #[test]
    fn three_halves_closed_form() {
        // K_{3/2}(z) = sqrt(π/2z) e^{-z} (1 + 1/z)
        for &z in &[0.01, 0.5, 3.0, 80.0] {
            let v = log_bessel_k(1.5, z).unwrap();
            let exact = 0.5 * (PI / (2.0 * z)).ln() - z + (1.0 + 1.0 / z).ln();
            assert!((v - exact).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn symmetric_in_order() {
        for &nu in &[0.3, 2.7, 15.0] {
            for &z in &[0.1, 5.0, 70.0] {
                assert_eq!(log_bessel_k(nu, z).unwrap(), log_bessel_k(-nu, z).unwrap());
            }
        }
    }

    #[test]
    fn tiny_arguments_do_not_overflow() {
        let v = log_bessel_k(63.0, 1e-150).unwrap();
        assert!(v.is_finite() && v > 1e4);
        let v0 = log_bessel_k(0.0, 1e-150).unwrap();
        // K_0(z) ~ -log(z/2) - γ
        let approx = (-(0.5e-150f64).ln() - 0.577_215_664_901_532_9).ln();
        assert!((v0 - approx).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(log_bessel_k(1.0, 0.0).is_err());
        assert!(log_bessel_k(1.0, -2.0).is_err());
        assert!(log_bessel_k(f64::NAN, 2.0).is_err());
        assert!(log_bessel_k(f64::INFINITY, 2.0).is_err());
    }
}

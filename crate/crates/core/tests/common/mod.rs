//! Independent numerical oracles shared by the integration tests.
//!
//! Everything here uses plain composite Simpson rules on dense grids so it
//! shares no code path with the library's adaptive Gauss–Kronrod routines.
#![allow(dead_code)]

/// `log ∫_a^b exp(g(x)) dx` by composite Simpson with `n` (even) panels,
/// shifted by the grid maximum to avoid underflow.
pub fn log_simpson<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| g(a + i as f64 * h)).collect();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (i, v) in vals.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * (v - peak).exp();
    }
    peak + (s * h / 3.0).ln()
}

/// Range `[lo, hi]` (within `[a, b]`) where `g` stays within `drop` nats
/// of its maximum over a coarse grid of `probe` points.
pub fn effective_range<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, probe: usize, drop: f64) -> (f64, f64) {
    let h = (b - a) / probe as f64;
    let vals: Vec<f64> = (0..=probe).map(|i| g(a + i as f64 * h)).collect();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = vals.iter().position(|&v| v > peak - drop).unwrap();
    let last = vals.iter().rposition(|&v| v > peak - drop).unwrap();
    let lo = a + first.saturating_sub(1) as f64 * h;
    let hi = a + (last + 1).min(probe) as f64 * h;
    (lo, hi)
}

/// `log K_ν(z)` from `K_ν(z) = ∫_0^∞ exp(-z cosh t) cosh(ν t) dt`.
pub fn log_bessel_k_integral(nu: f64, z: f64) -> f64 {
    let g = |t: f64| {
        let nt = nu * t;
        // log cosh(x) = |x| + log1p(exp(-2|x|)) - log 2
        let lc = nt.abs() + (-2.0 * nt.abs()).exp().ln_1p() - std::f64::consts::LN_2;
        -z * t.cosh() + lc
    };
    let (lo, hi) = effective_range(&g, 0.0, 30.0, 30_000, 50.0);
    log_simpson(g, lo, hi, 40_000)
}

/// Unnormalised log GIG kernel on the log scale: `order u - chi e^{-u}/2 - psi e^u/2`.
pub fn gig_log_kernel_u(order: f64, chi: f64, psi: f64, u: f64) -> f64 {
    order * u - 0.5 * chi * (-u).exp() - 0.5 * psi * u.exp()
}

/// `(mass, mean, variance)` of the GIG truncated to `v > lower`, by
/// Simpson on `u = log v` over a wide fixed window.
pub fn truncated_gig_moments(order: f64, chi: f64, psi: f64, lower: f64) -> (f64, f64, f64) {
    let lo = if lower > 0.0 { lower.ln() } else { -60.0 };
    let g = |u: f64| gig_log_kernel_u(order, chi, psi, u);
    let (a, b) = effective_range(&g, lo, 12.0, 40_000, 60.0);
    let a = a.max(lo);
    let n = 200_000;
    let l0 = log_simpson(g, a, b, n);
    let l1 = log_simpson(|u| g(u) + u, a, b, n);
    let l2 = log_simpson(|u| g(u) + 2.0 * u, a, b, n);
    let mean = (l1 - l0).exp();
    let m2 = (l2 - l0).exp();
    (l0, mean, m2 - mean * mean)
}

/// CDF of the truncated GIG at `v`, by Simpson on the log scale.
pub struct TruncatedGigCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TruncatedGigCdf {
    pub fn new(order: f64, chi: f64, psi: f64, lower: f64) -> Self {
        let lo = if lower > 0.0 { lower.ln() } else { -60.0 };
        let g = |u: f64| gig_log_kernel_u(order, chi, psi, u);
        let (a, b) = effective_range(&g, lo, 12.0, 40_000, 60.0);
        let a = a.max(lo);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| g(a + i as f64 * h)).collect();
        let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = vals.iter().map(|v| (v - peak).exp()).collect();
        let mut cdf = vec![0.0; n + 1];
        for i in 1..=n {
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
        }
        let total = cdf[n];
        cdf.iter_mut().for_each(|c| *c /= total);
        let grid = (0..=n).map(|i| (a + i as f64 * h).exp()).collect();
        Self { grid, cdf }
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self.grid.binary_search_by(|g| g.total_cmp(&v)) {
            Ok(i) => self.cdf[i],
            Err(0) => 0.0,
            Err(i) if i >= self.grid.len() => 1.0,
            Err(i) => {
                let (x0, x1) = (self.grid[i - 1], self.grid[i]);
                let w = (v - x0) / (x1 - x0);
                self.cdf[i - 1] * (1.0 - w) + self.cdf[i] * w
            }
        }
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn log_normal_1d(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

fn log_sum(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + xs.map(|x| (x - peak).exp()).sum::<f64>().ln()
}

/// Log marginal likelihood of a one-dimensional tree with every latent
/// node value integrated out numerically: sum-product on a uniform
/// trapezoid grid with a flat prior on the root value. `merges[k] =
/// (left, right, time)` creates node `n + k`.
pub fn log_marginal_tree_1d(x: &[f64], merges: &[(usize, usize, f64)], phi: f64, points: usize) -> f64 {
    let n = x.len();
    let root_time = merges.last().unwrap().2;
    let span = 12.0 * (root_time * phi).sqrt();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min) - span;
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + span;
    let h = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
    let trap = |i: usize| if i == 0 || i == points - 1 { 0.5 * h } else { h };
    let mut time = vec![0.0; 2 * n - 1];
    let mut msg: Vec<Option<Vec<f64>>> = vec![None; 2 * n - 1];
    for (k, &(a, b, t)) in merges.iter().enumerate() {
        let id = n + k;
        time[id] = t;
        let mut out = vec![0.0; points];
        for child in [a, b] {
            let var = (t - time[child]) * phi;
            for (j, &z) in grid.iter().enumerate() {
                out[j] += match &msg[child] {
                    None => log_normal_1d(x[child], z, var),
                    Some(m) => log_sum((0..points).map(|i| {
                        m[i] + log_normal_1d(grid[i], z, var) + trap(i).ln()
                    })),
                };
            }
        }
        msg[id] = Some(out);
    }
    let root = msg[2 * n - 2].as_ref().unwrap();
    log_sum((0..points).map(|i| root[i] + trap(i).ln()))
}

/// `log ∫_{lower}^∞ exp(-λΔ) N(m_1 - m_2 | 0, vΦ) dΔ` with `v = 2Δ + r`,
/// written in terms of `ε = (m_1 - m_2)ᵀ Φ⁻¹ (m_1 - m_2)` and `log|Φ|`.
/// `lower` must be at least `-r/2`.
pub fn log_increment_marginal(eps: f64, r: f64, lambda: f64, d: usize, log_det: f64, lower: f64) -> f64 {
    let df = d as f64;
    let dmin = -0.5 * r;
    // Δ = dmin + e^y
    let g = |y: f64| {
        let delta = dmin + y.exp();
        let v = 2.0 * (delta - dmin);
        -lambda * delta - 0.5 * df * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * log_det
            - eps / (2.0 * v)
            + y
    };
    let y_lo = if lower > dmin { (lower - dmin).ln() } else { -80.0 };
    let (a, b) = effective_range(&g, y_lo, 15.0, 40_000, 60.0);
    log_simpson(g, a.max(y_lo), b, 200_000)
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, _) = mean_var(&ra);
    let (mb, _) = mean_var(&rb);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

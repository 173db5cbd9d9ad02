//! Adaptive Gauss–Kronrod quadrature, plus a helper for integrating
//! unimodal densities given in log form.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One G7/K15 panel: `(kronrod estimate, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
///
/// Panels are bisected (largest error first) until the summed error
/// estimate drops below `max(abs_tol, rel_tol * |I|)` or `max_panels` is hit.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    const MAX_PANELS: usize = 2000;
    if a == b {
        return 0.0;
    }
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    loop {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || panels.len() >= MAX_PANELS {
            return total;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
}

/// `log ∫ exp(g(u)) du` over `(lo, hi)` for a log-concave `g` with its
/// maximiser at `mode` (already clamped into the interval).
///
/// Infinite bounds are replaced by the point where `g` has fallen 46 nats
/// (about 1e-20) below its peak, found by doubling steps of initial size
/// `scale`.
pub fn log_integrate_unimodal<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    mode: f64,
    scale: f64,
) -> f64 {
    const DROP: f64 = 46.0;
    let peak = g(mode);
    if !peak.is_finite() {
        return peak;
    }
    let reach = |dir: f64, bound: f64| -> f64 {
        let mut step = scale;
        let mut x = mode;
        for _ in 0..200 {
            let next = x + dir * step;
            if (dir > 0.0 && next >= bound) || (dir < 0.0 && next <= bound) {
                return bound;
            }
            x = next;
            if g(x) < peak - DROP {
                return x;
            }
            step *= 2.0;
        }
        x
    };
    let left = reach(-1.0, lo);
    let right = reach(1.0, hi);
    let h = |u: f64| (g(u) - peak).exp();
    let total = integrate(h, left, mode, 0.0, 1e-12) + integrate(h, mode, right, 0.0, 1e-12);
    peak + total.ln()
}

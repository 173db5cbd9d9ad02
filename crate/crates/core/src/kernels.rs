//! Covariance models over the `d` observation dimensions.
//!
//! A [`CovarianceModel`] owns the assembled matrix `Φ` together with its
//! Cholesky factor; all downstream quadratic forms and log-determinants go
//! through the factor and never form `Φ⁻¹`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jitter multipliers (relative to `trace(Φ)/d`) tried after a failed
/// factorization.
const JITTER_STEPS: [f64; 2] = [1e-10, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SquaredExponential,
    Matern32Grid,
    Diagonal,
}

/// Hyperparameters, tagged by kernel kind.
///
/// `ell` enters the squared-exponential kernel as
/// `exp(-d_ij² / (2 ell))`, i.e. it scales the *squared* distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Theta {
    SquaredExponential { ell: f64, sigma2: f64 },
    Matern32Grid { ell_x: f64, ell_y: f64, sigma2: f64 },
    Diagonal { variances: Vec<f64> },
}

/// Per-dimension coordinates. Serialises as `{"positions": [...]}` or
/// `{"grid": [h, w]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coords {
    Positions(Vec<f64>),
    Grid([usize; 2]),
}

/// Bounds (natural log scale) for a named hyperparameter.
pub fn log_bounds(name: &str) -> (f64, f64) {
    match name {
        "sigma2" => (-25.0, 5.0),
        n if n.starts_with("var") => (-25.0, 10.0),
        _ => (-10.0, 10.0),
    }
}

impl Theta {
    pub fn kind(&self) -> KernelKind {
        match self {
            Theta::SquaredExponential { .. } => KernelKind::SquaredExponential,
            Theta::Matern32Grid { .. } => KernelKind::Matern32Grid,
            Theta::Diagonal { .. } => KernelKind::Diagonal,
        }
    }

    /// Names of the scalar coordinates, in the order used by [`Self::get`].
    pub fn names(&self) -> Vec<String> {
        match self {
            Theta::SquaredExponential { .. } => vec!["ell".into(), "sigma2".into()],
            Theta::Matern32Grid { .. } => vec!["ell_x".into(), "ell_y".into(), "sigma2".into()],
            Theta::Diagonal { variances } => {
                (0..variances.len()).map(|i| format!("var{i}")).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Theta::SquaredExponential { .. } => 2,
            Theta::Matern32Grid { .. } => 3,
            Theta::Diagonal { variances } => variances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Theta::SquaredExponential { ell, sigma2 } => [*ell, *sigma2][i],
            Theta::Matern32Grid {
                ell_x,
                ell_y,
                sigma2,
            } => [*ell_x, *ell_y, *sigma2][i],
            Theta::Diagonal { variances } => variances[i],
        }
    }

    pub fn with(&self, i: usize, value: f64) -> Theta {
        let mut t = self.clone();
        match &mut t {
            Theta::SquaredExponential { ell, sigma2 } => *[ell, sigma2][i] = value,
            Theta::Matern32Grid {
                ell_x,
                ell_y,
                sigma2,
            } => *[ell_x, ell_y, sigma2][i] = value,
            Theta::Diagonal { variances } => variances[i] = value,
        }
        t
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("sigma2 must be nonnegative, got {v}")))
            }
        };
        match self {
            Theta::SquaredExponential { ell, sigma2 } => {
                positive("ell", *ell)?;
                nonneg(*sigma2)
            }
            Theta::Matern32Grid {
                ell_x,
                ell_y,
                sigma2,
            } => {
                positive("ell_x", *ell_x)?;
                positive("ell_y", *ell_y)?;
                nonneg(*sigma2)
            }
            Theta::Diagonal { variances } => {
                variances.iter().try_for_each(|&v| positive("variance", v))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceModel {
    theta: Theta,
    coords: Option<Coords>,
    d: usize,
    phi: Vec<f64>,
    /// Row-major lower Cholesky factor (or the square-root diagonal).
    factor: Vec<f64>,
    jitter: f64,
    log_det: f64,
}

impl CovarianceModel {
    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn kind(&self) -> KernelKind {
        self.theta.kind()
    }

    pub fn coords(&self) -> Option<&Coords> {
        self.coords.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Jitter added to the diagonal to obtain a factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.d + j]
    }

    /// `Φ` as a row-major `d × d` slice.
    pub fn matrix(&self) -> &[f64] {
        &self.phi
    }

    fn is_diagonal(&self) -> bool {
        matches!(self.theta, Theta::Diagonal { .. })
    }

    /// `L⁻¹ δ`, so that `δᵀ Φ⁻¹ δ = |L⁻¹ δ|²`.
    pub fn whiten(&self, delta: &[f64]) -> Result<Vec<f64>> {
        if delta.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: delta.len(),
            });
        }
        let mut y = vec![0.0; self.d];
        self.whiten_into(delta, &mut y);
        Ok(y)
    }

    /// Forward substitution into a caller-provided buffer; lengths must be `d`.
    pub fn whiten_into(&self, delta: &[f64], out: &mut [f64]) {
        let d = self.d;
        if self.is_diagonal() {
            for i in 0..d {
                out[i] = delta[i] / self.factor[i];
            }
            return;
        }
        for i in 0..d {
            let row = &self.factor[i * d..i * d + i];
            let acc: f64 = row.iter().zip(&out[..i]).map(|(l, y)| l * y).sum();
            out[i] = (delta[i] - acc) / self.factor[i * d + i];
        }
    }

    /// `δᵀ Φ⁻¹ δ` via a triangular solve against the cached factor.
    pub fn quad_form(&self, delta: &[f64]) -> Result<f64> {
        let y = self.whiten(delta)?;
        Ok(y.iter().map(|v| v * v).sum())
    }

    /// `log |Φ|` (including any jitter).
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Multiplies `L ξ`, mapping white noise to `N(0, Φ)`.
    pub fn color(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.d;
        if self.is_diagonal() {
            return xi.iter().zip(&self.factor).map(|(x, f)| x * f).collect();
        }
        (0..d)
            .map(|i| {
                self.factor[i * d..=i * d + i]
                    .iter()
                    .zip(xi)
                    .map(|(l, x)| l * x)
                    .sum()
            })
            .collect()
    }
}

/// Default coordinates: unit-spaced positions `0..d-1`.
pub fn default_positions(d: usize) -> Coords {
    Coords::Positions((0..d).map(|i| i as f64).collect())
}

/// Assembles `Φ` for `theta` over `d` dimensions and factorizes it.
///
/// Squared-exponential kernels use `coords` as 1-D positions (default
/// `0..d-1`); the Matérn 3/2 product kernel requires a `Grid([h, w])` with
/// `h * w == d`, dimension `j` sitting at row `j / w`, column `j % w`.
pub fn build_covariance(theta: &Theta, coords: Option<&Coords>, d: usize) -> Result<CovarianceModel> {
    theta.validate()?;
    if d == 0 {
        return Err(Error::Config("covariance dimension must be positive".into()));
    }
    let (phi, coords) = match theta {
        Theta::SquaredExponential { ell, sigma2 } => {
            let coords = coords.cloned().unwrap_or_else(|| default_positions(d));
            let pos = match &coords {
                Coords::Positions(p) if p.len() == d => p.clone(),
                Coords::Positions(p) => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: p.len(),
                    })
                }
                Coords::Grid(_) => {
                    return Err(Error::Config(
                        "squared exponential kernel needs 1-D positions".into(),
                    ))
                }
            };
            let mut phi = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let dist = pos[i] - pos[j];
                    let nugget = if i == j { *sigma2 } else { 0.0 };
                    phi[i * d + j] = (-dist * dist / (2.0 * ell)).exp() + nugget;
                }
            }
            (phi, Some(coords))
        }
        Theta::Matern32Grid {
            ell_x,
            ell_y,
            sigma2,
        } => {
            let [h, w] = match coords {
                Some(Coords::Grid(g)) => *g,
                _ => return Err(Error::Config("Matérn grid kernel needs grid coordinates".into())),
            };
            if h * w != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: h * w,
                });
            }
            let s3 = 3f64.sqrt();
            let mut phi = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let dx = ((i % w) as f64 - (j % w) as f64).abs();
                    let dy = ((i / w) as f64 - (j / w) as f64).abs();
                    let ax = s3 * dx / ell_x;
                    let ay = s3 * dy / ell_y;
                    let nugget = if i == j { *sigma2 } else { 0.0 };
                    phi[i * d + j] = (1.0 + ax) * (1.0 + ay) * (-ax - ay).exp() + nugget;
                }
            }
            (phi, Some(Coords::Grid([h, w])))
        }
        Theta::Diagonal { variances } => {
            if variances.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: variances.len(),
                });
            }
            let mut phi = vec![0.0; d * d];
            for (i, v) in variances.iter().enumerate() {
                phi[i * d + i] = *v;
            }
            let factor: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
            let log_det = variances.iter().map(|v| v.ln()).sum();
            return Ok(CovarianceModel {
                theta: theta.clone(),
                coords: None,
                d,
                phi,
                factor,
                jitter: 0.0,
                log_det,
            });
        }
    };
    let (factor, jitter) = factorize(&phi, d)?;
    let log_det = 2.0 * (0..d).map(|i| factor[i * d + i].ln()).sum::<f64>();
    Ok(CovarianceModel {
        theta: theta.clone(),
        coords,
        d,
        phi,
        factor,
        jitter,
        log_det,
    })
}

/// Cholesky with the two-step jitter escalation. Returns the row-major
/// lower factor and the jitter used.
fn factorize(phi: &[f64], d: usize) -> Result<(Vec<f64>, f64)> {
    let base = DMatrix::from_row_slice(d, d, phi);
    let scale = base.trace() / d as f64;
    let mut last = 0.0;
    for jitter in std::iter::once(0.0).chain(JITTER_STEPS.iter().map(|j| j * scale)) {
        last = jitter;
        let mut m = base.clone();
        for i in 0..d {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            let l = chol.l();
            let mut out = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..=i {
                    out[i * d + j] = l[(i, j)];
                }
            }
            if out.iter().all(|v| v.is_finite()) {
                return Ok((out, jitter));
            }
        }
    }
    Err(Error::NonPsd { jitter: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn se(ell: f64, sigma2: f64) -> Theta {
        Theta::SquaredExponential { ell, sigma2 }
    }

    #[test]
    fn se_diagonal_is_one_plus_noise() {
        let m = build_covariance(&se(3.0, 0.25), None, 5).unwrap();
        for i in 0..5 {
            assert_eq!(m.entry(i, i), 1.25);
        }
    }

    #[test]
    fn se_entry_at_squared_distance_two() {
        let coords = Coords::Positions(vec![0.0, 2f64.sqrt()]);
        let m = build_covariance(&se(1.0, 0.0), Some(&coords), 2).unwrap();
        assert!((m.entry(0, 1) - (-1f64).exp()).abs() < 1e-15);
        assert!((m.entry(0, 1) - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn matern_unit_marginal_variance() {
        let t = Theta::Matern32Grid {
            ell_x: 2.0,
            ell_y: 3.0,
            sigma2: 0.0,
        };
        let m = build_covariance(&t, Some(&Coords::Grid([3, 4])), 12).unwrap();
        assert_eq!(m.entry(5, 5), 1.0);
        // neighbours along x: (1 + √3/2) e^{-√3/2}
        let a = 3f64.sqrt() / 2.0;
        assert!((m.entry(0, 1) - (1.0 + a) * (-a).exp()).abs() < 1e-15);
        assert!(m.entry(0, 11) > 0.0 && m.entry(0, 11) < m.entry(0, 1));
    }

    #[test]
    fn matern_requires_grid() {
        let t = Theta::Matern32Grid {
            ell_x: 1.0,
            ell_y: 1.0,
            sigma2: 0.0,
        };
        assert!(build_covariance(&t, None, 4).is_err());
        assert!(build_covariance(&t, Some(&Coords::Grid([2, 3])), 4).is_err());
    }

    #[test]
    fn quad_form_and_log_det_for_diagonal() {
        let id = build_covariance(&Theta::Diagonal { variances: vec![1.0, 1.0] }, None, 2).unwrap();
        assert_eq!(id.quad_form(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(id.quad_form(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(id.log_det(), 0.0);
        let two = build_covariance(&Theta::Diagonal { variances: vec![2.0, 2.0] }, None, 2).unwrap();
        assert!((two.log_det() - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let id = build_covariance(&Theta::Diagonal { variances: vec![1.0; 3] }, None, 3).unwrap();
        assert!(matches!(
            id.quad_form(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn near_singular_kernel_gets_jitter() {
        // ell huge and no noise: Φ ≈ all-ones, numerically singular
        let m = build_covariance(&se(1e8, 0.0), None, 16).unwrap();
        assert!(m.jitter() > 0.0);
        assert!(m.jitter() <= 1e-6 * 1.0 + 1e-18);
    }

    #[test]
    fn invalid_theta_rejected() {
        assert!(build_covariance(&se(0.0, 0.0), None, 3).is_err());
        assert!(build_covariance(&se(1.0, -1.0), None, 3).is_err());
        assert!(build_covariance(&Theta::Diagonal { variances: vec![1.0, 0.0] }, None, 2).is_err());
    }

    #[test]
    fn theta_coordinate_access() {
        let t = se(2.0, 0.5);
        assert_eq!(t.names(), vec!["ell", "sigma2"]);
        assert_eq!(t.with(0, 3.0).get(0), 3.0);
        assert_eq!(t.with(1, 0.1).get(1), 0.1);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"kind":"squared_exponential","ell":2.0,"sigma2":0.5}"#);
        let c: Coords = serde_json::from_str(r#"{"grid":[16,16]}"#).unwrap();
        assert_eq!(c, Coords::Grid([16, 16]));
    }
}

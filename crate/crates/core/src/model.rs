//! Model constants and initial return distributions.
//!
//! The return and variance follow
//!
//! ```text
//! df = (alpha - v/2) dt + sqrt(v) dW1
//! dv = -gamma (v - theta) dt + k sqrt(v) dW2
//! ```
//!
//! with independent Wiener drivers and `v(0) = 0`. The initial return is drawn
//! from an [`InitialReturnDistribution`], independent of the variance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated Heston constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    gamma: f64,
    k: f64,
    theta: f64,
    alpha: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositiveParameter { name, value })
    }
}

impl HestonParams {
    /// Validates the four constants and the Feller condition `2*gamma*theta > k^2`.
    pub fn new(gamma: f64, k: f64, theta: f64, alpha: f64) -> Result<Self> {
        let params = Self {
            gamma: positive("gamma", gamma)?,
            k: positive("k", k)?,
            theta: positive("theta", theta)?,
            alpha: positive("alpha", alpha)?,
        };
        let ratio = params.feller_ratio();
        if ratio <= 1.0 {
            return Err(Error::FellerViolation { ratio });
        }
        Ok(params)
    }

    /// Like [`HestonParams::new`], but also takes the initial variance, which
    /// must be exactly zero.
    pub fn with_initial_variance(gamma: f64, k: f64, theta: f64, alpha: f64, initial_variance: f64) -> Result<Self> {
        if initial_variance != 0.0 {
            return Err(Error::NonzeroInitialVariance(initial_variance));
        }
        Self::new(gamma, k, theta, alpha)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `2*gamma*theta / k^2`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.gamma * self.theta / (self.k * self.k)
    }

    /// Exponent of the hyperbolic power factor in the kernel; equal to the Feller ratio.
    pub fn power_exponent(&self) -> f64 {
        self.feller_ratio()
    }
}

/// Shorthand for [`HestonParams::new`].
pub fn validate_params(gamma: f64, k: f64, theta: f64, alpha: f64) -> Result<HestonParams> {
    HestonParams::new(gamma, k, theta, alpha)
}

/// Symmetric initial return density, independent of the (zero) initial variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialReturnDistribution {
    /// Uniform on `(-half_width, half_width)`; its transform is a point mass at
    /// `mu = 0`, so it is handled by closed forms only.
    Uniform { half_width: f64 },
    /// Density `m/sqrt(pi) * exp(-m^2 f^2)`.
    Gaussian { m: f64 },
    /// Point mass at `f = 0`.
    Dirac,
    /// Density `m / (pi (1 + m^2 f^2))`.
    Cauchy { m: f64 },
}

impl InitialReturnDistribution {
    pub fn uniform(half_width: f64) -> Result<Self> {
        Ok(Self::Uniform {
            half_width: positive("L", half_width)?,
        })
    }

    pub fn gaussian(m: f64) -> Result<Self> {
        Ok(Self::Gaussian { m: positive("m", m)? })
    }

    pub fn dirac() -> Self {
        Self::Dirac
    }

    pub fn cauchy(m: f64) -> Result<Self> {
        Ok(Self::Cauchy { m: positive("m", m)? })
    }

    /// Re-checks the shape parameter, for values built by hand or deserialized.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { half_width } => positive("L", half_width).map(|_| ()),
            Self::Gaussian { m } | Self::Cauchy { m } => positive("m", m).map(|_| ()),
            Self::Dirac => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Gaussian { .. } => "gaussian",
            Self::Dirac => "dirac",
            Self::Cauchy { .. } => "cauchy",
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform { .. })
    }

    /// Fourier transform of the initial density, normalized so that `M(0) = 1`.
    pub fn multiplier(&self, mu: f64) -> Result<Complex64> {
        let value = match *self {
            Self::Uniform { .. } => return Err(Error::UnsupportedForUniform),
            Self::Gaussian { m } => (-mu * mu / (4.0 * m * m)).exp(),
            Self::Dirac => 1.0,
            Self::Cauchy { m } => (-mu.abs() / m).exp(),
        };
        Ok(Complex64::new(value, 0.0))
    }

    /// Draws an initial return.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            Self::Gaussian { m } => {
                let z: f64 = rng.sample(StandardNormal);
                z * FRAC_1_SQRT_2 / m
            }
            Self::Dirac => 0.0,
            Self::Cauchy { m } => {
                // u in (0, 1): reject the closed endpoint 0
                let mut u: f64 = rng.random();
                while u == 0.0 {
                    u = rng.random();
                }
                (PI * (u - 0.5)).tan() / m
            }
        }
    }
}

/// Which computational route answers an [`EvalRequest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Series,
    MonteCarlo,
    Compare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub t: f64,
    pub f_grid: Vec<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub method: Method,
}

impl EvalRequest {
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "t must be finite and non-negative, got {}",
                self.t
            )));
        }
        if self.f_grid.is_empty() {
            return Err(Error::InvalidArgument("f grid is empty".into()));
        }
        if let Some(f) = self.f_grid.iter().find(|f| !f.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite return {f}")));
        }
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn figure_parameter_sets_validate() {
        let p = validate_params(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.feller_ratio(), 2.0);
        let p = validate_params(10.0, 1.0, 0.1, 10.0).unwrap();
        assert_relative_eq!(p.feller_ratio(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn feller_violation_is_refused() {
        let err = validate_params(1.0, 2.0, 1.0, 1.0).unwrap_err();
        assert_eq!(err, Error::FellerViolation { ratio: 0.5 });
        // boundary case 2*gamma*theta == k^2
        assert!(matches!(
            validate_params(2.0, 2.0, 1.0, 1.0),
            Err(Error::FellerViolation { .. })
        ));
    }

    #[test]
    fn non_positive_parameters_are_refused() {
        assert!(matches!(
            validate_params(0.0, 1.0, 1.0, 1.0),
            Err(Error::NonPositiveParameter { name: "gamma", .. })
        ));
        assert!(matches!(
            validate_params(1.0, 1.0, 1.0, -1.0),
            Err(Error::NonPositiveParameter { name: "alpha", .. })
        ));
        assert!(matches!(
            validate_params(1.0, f64::NAN, 1.0, 1.0),
            Err(Error::NonPositiveParameter { name: "k", .. })
        ));
    }

    #[test]
    fn nonzero_initial_variance_is_refused() {
        assert_eq!(
            HestonParams::with_initial_variance(1.0, 1.0, 1.0, 1.0, 0.1).unwrap_err(),
            Error::NonzeroInitialVariance(0.1)
        );
        assert!(HestonParams::with_initial_variance(1.0, 1.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn multiplier_values() {
        let g1 = InitialReturnDistribution::gaussian(1.0).unwrap();
        assert_eq!(g1.multiplier(0.0).unwrap(), Complex64::new(1.0, 0.0));
        let c1 = InitialReturnDistribution::cauchy(1.0).unwrap();
        assert_relative_eq!(c1.multiplier(2.0).unwrap().re, (-2.0f64).exp());
        let g2 = InitialReturnDistribution::gaussian(2.0).unwrap();
        assert_relative_eq!(g2.multiplier(2.0).unwrap().re, (-0.25f64).exp());
        assert_eq!(
            InitialReturnDistribution::Dirac.multiplier(7.0).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        assert_eq!(
            InitialReturnDistribution::uniform(1.0).unwrap().multiplier(0.0),
            Err(Error::UnsupportedForUniform)
        );
    }

    #[test]
    fn cauchy_multiplier_matches_heaviside_form() {
        let m = 0.7;
        let dist = InitialReturnDistribution::cauchy(m).unwrap();
        for &mu in &[-3.0, -0.2, 0.0, 0.4, 5.0] {
            let h = if mu >= 0.0 { 1.0 } else { 0.0 };
            let printed = ((-mu / m).exp() - (mu / m).exp()) * h + (mu / m).exp();
            // the printed form cancels two terms of size exp(|mu|/m) for mu > 0
            let scale = (mu.abs() / m).exp();
            assert!((dist.multiplier(mu).unwrap().re - printed).abs() <= 1e-15 * scale);
        }
    }

    #[test]
    fn gaussian_sampler_variance() {
        let m = 1.3;
        let dist = InitialReturnDistribution::gaussian(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = 1.0 / (2.0 * m * m);
        // the variance estimator of a normal sample has standard error sigma^2 sqrt(2/n)
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() < 4.0 * se, "{var} vs {target}");
    }

    #[test]
    fn uniform_sampler_moments() {
        let l = 2.5;
        let dist = InitialReturnDistribution::uniform(l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = l * l / 3.0;
        assert!(mean.abs() < 4.0 * (target / n as f64).sqrt());
        // fourth central moment of U(-L, L) is L^4/5
        let se = ((l.powi(4) / 5.0 - target * target) / n as f64).sqrt();
        assert!((var - target).abs() < 4.0 * se);
        assert!(xs.iter().all(|x| x.abs() < l));
    }

    #[test]
    fn cauchy_sampler_median_and_quartiles() {
        let m = 2.0;
        let dist = InitialReturnDistribution::cauchy(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..100_001).map(|_| dist.sample(&mut rng)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| xs[(p * (xs.len() - 1) as f64) as usize];
        assert!(q(0.5).abs() < 0.02);
        assert!((q(0.75) - 1.0 / m).abs() < 0.02);
        assert!((q(0.25) + 1.0 / m).abs() < 0.02);
    }

    #[test]
    fn eval_request_validation() {
        let ok = EvalRequest {
            t: 0.5,
            f_grid: vec![0.0],
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            method: Method::Quadrature,
        };
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.f_grid.clear();
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.t = f64::INFINITY;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.rel_tol = 0.0;
        assert!(bad.validate().is_err());
    }

    fn any_dist() -> impl Strategy<Value = InitialReturnDistribution> {
        prop_oneof![
            (0.05f64..20.0).prop_map(|m| InitialReturnDistribution::Gaussian { m }),
            (0.05f64..20.0).prop_map(|m| InitialReturnDistribution::Cauchy { m }),
            Just(InitialReturnDistribution::Dirac),
        ]
    }

    proptest! {
        #[test]
        fn multiplier_is_hermitian_and_bounded(dist in any_dist(), mu in -50.0f64..50.0) {
            let plus = dist.multiplier(mu).unwrap();
            let minus = dist.multiplier(-mu).unwrap();
            prop_assert_eq!(minus, plus.conj());
            prop_assert!(plus.norm() <= 1.0);
        }
    }
}

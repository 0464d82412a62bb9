//! Characteristic kernel of the return increment and terminal variance.
//!
//! With `X = f(t) - f(0)` and `v(0) = 0`,
//!
//! ```text
//! K(t, mu, xi) = E[exp(-i mu X - i xi v(t))]
//! ```
//!
//! so the transform of the joint density factors as `M(mu) * K(t, mu, xi)`.
//! `K = exp(A)` where `A` solves the affine Riccati system along the
//! characteristics of the transformed Fokker-Planck equation. Writing
//! `q = k^2 mu^2 - i k^2 mu + gamma^2`, `d = sqrt(q)` (principal root,
//! `Re q > 0` on the real axis) and `e = exp(-d t)`:
//!
//! ```text
//! A(xi = 0) = -i alpha mu t + gamma^2 theta t / k^2
//!             - (2 gamma theta / k^2) ln(((d + gamma) + (d - gamma) e) / (2 d))
//! dA/dw     = 2 gamma theta (1 - e) / ((d + gamma) + (d - gamma) e),   w = -i xi
//! d2A/dw2   = k^2 / (2 gamma theta) * (dA/dw)^2
//! ```
//!
//! giving `i K1 / K0 = dA/dw` and `-K2 / K0 = (dA/dw)^2 + d2A/dw2`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{HestonParams, InitialReturnDistribution};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `K` and its first two `xi`-derivatives at `xi = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValues {
    pub k0: Complex64,
    pub k1: Complex64,
    pub k2: Complex64,
}

impl KernelValues {
    /// `i K1 / K0`: the variance weight `dA/dw` that turns the denominator
    /// integrand into the numerator integrand.
    pub fn first_moment_weight(&self) -> Complex64 {
        I * self.k1 / self.k0
    }

    /// `-K2 / K0`.
    pub fn second_moment_weight(&self) -> Complex64 {
        -self.k2 / self.k0
    }
}

/// `exp(z) - 1` without cancellation for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half_sin = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half_sin * half_sin, x.exp() * y.sin())
}

/// Kernel pieces shared by the analytic derivatives and the continuity monitor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelParts {
    pub log_k0: Complex64,
    /// Continuous logarithm of the hyperbolic base; its imaginary part is what
    /// the continuity monitor tracks.
    pub log_base: Complex64,
    /// `dA/dw`.
    pub weight1: Complex64,
    /// `d2A/dw2`.
    pub weight2: Complex64,
}

fn discriminant_root(params: &HestonParams, mu: f64) -> Complex64 {
    let k2 = params.k() * params.k();
    let g = params.gamma();
    Complex64::new(k2 * mu * mu + g * g, -k2 * mu).sqrt()
}

pub(crate) fn kernel_parts(params: &HestonParams, t: f64, mu: f64) -> KernelParts {
    let g = params.gamma();
    let theta = params.theta();
    let k2 = params.k() * params.k();
    let d = discriminant_root(params, mu);
    let em = expm1(-d * t);
    let e = em + 1.0;

    // Both logarithm arguments have positive real part for Re d > 0, so the
    // principal branches add up to a continuous logarithm of their product.
    let lead = (d + g) / (2.0 * d);
    let ratio = (d - g) / (d + g);
    let log_base = lead.ln() + (ratio * e + 1.0).ln();

    let log_k0 = Complex64::new(g * g * theta * t / k2, -params.alpha() * mu * t)
        - (2.0 * g * theta / k2) * (log_base + 0.5 * d * t);

    let denom = 2.0 * d + (d - g) * em;
    let weight1 = -2.0 * g * theta * em / denom;
    let weight2 = k2 / (2.0 * g * theta) * weight1 * weight1;
    KernelParts {
        log_k0,
        log_base,
        weight1,
        weight2,
    }
}

/// `K(t, mu, 0)` together with its first two `xi`-derivatives, from the closed form.
pub fn riccati_kernel(params: &HestonParams, t: f64, mu: f64) -> KernelValues {
    if t == 0.0 {
        return KernelValues {
            k0: Complex64::new(1.0, 0.0),
            k1: Complex64::new(0.0, 0.0),
            k2: Complex64::new(0.0, 0.0),
        };
    }
    let parts = kernel_parts(params, t, mu);
    let k0 = parts.log_k0.exp();
    KernelValues {
        k0,
        k1: -I * parts.weight1 * k0,
        k2: -(parts.weight1 * parts.weight1 + parts.weight2) * k0,
    }
}

/// Full closed form `K(t, mu, xi)` for complex `xi`. Used to cross-check the
/// analytic derivatives by differencing in `xi`.
pub fn characteristic(params: &HestonParams, t: f64, mu: f64, xi: Complex64) -> Complex64 {
    let g = params.gamma();
    let theta = params.theta();
    let k2 = params.k() * params.k();
    let d = discriminant_root(params, mu);
    let w = -I * xi;
    let e = (-d * t).exp();
    let lead = d + g - k2 * w;
    let log_base = (lead / (2.0 * d)).ln() + ((d - g + k2 * w) / lead * e + 1.0).ln();
    let exponent = Complex64::new(0.0, -params.alpha() * mu * t) + (g * theta / k2) * (g - d) * t
        - (2.0 * g * theta / k2) * log_base;
    exponent.exp()
}

/// Tracks the argument of the complex power base along an ordered `mu` sweep.
#[derive(Debug, Clone, Default)]
pub struct ContinuityMonitor {
    last: Option<(f64, f64)>,
}

impl ContinuityMonitor {
    /// Largest admissible jump of the argument between adjacent samples.
    pub const MAX_JUMP: f64 = FRAC_PI_2;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, mu: f64, arg: f64) -> Result<()> {
        if let Some((prev_mu, prev_arg)) = self.last {
            let jump = (arg - prev_arg).abs();
            if jump >= Self::MAX_JUMP {
                return Err(Error::BranchDiscontinuity {
                    from: prev_mu,
                    to: mu,
                    jump,
                });
            }
        }
        self.last = Some((mu, arg));
        Ok(())
    }
}

/// Evaluates the kernel along an ordered sweep, failing on a branch jump.
pub fn riccati_sweep(params: &HestonParams, t: f64, mus: &[f64]) -> Result<Vec<KernelValues>> {
    let mut monitor = ContinuityMonitor::new();
    mus.iter()
        .map(|&mu| {
            if t > 0.0 {
                monitor.observe(mu, kernel_parts(params, t, mu).log_base.im)?;
            }
            Ok(riccati_kernel(params, t, mu))
        })
        .collect()
}

/// `sqrt(k^2 (4 mu^2 + 1) + 4 gamma^2)`, twice the discriminant root on the
/// contour shifted by `i/2`.
pub fn lambda_shifted(params: &HestonParams, mu: f64) -> f64 {
    let k2 = params.k() * params.k();
    let g = params.gamma();
    (k2 * (4.0 * mu * mu + 1.0) + 4.0 * g * g).sqrt()
}

/// Closed-form integrands on the shifted contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastpathValues {
    pub psi: Complex64,
    pub phi: Complex64,
    pub lambda: f64,
}

/// `sinh(lt/4) / (l cosh(lt/4) + 2 gamma sinh(lt/4))`, overflow-free.
pub fn fastpath_ratio(params: &HestonParams, t: f64, lambda: f64) -> f64 {
    let g = params.gamma();
    let decay = (-0.5 * lambda * t).exp();
    -(-0.5 * lambda * t).exp_m1() / ((lambda + 2.0 * g) + (lambda - 2.0 * g) * decay)
}

/// `ln(l / (l cosh(lt/4) + 2 gamma sinh(lt/4)))`, overflow-free.
fn fastpath_log_power_base(params: &HestonParams, t: f64, lambda: f64) -> f64 {
    let g = params.gamma();
    let x = 0.25 * lambda * t;
    let decay = (-2.0 * x).exp();
    (2.0 * lambda).ln() - x - ((lambda + 2.0 * g) + (lambda - 2.0 * g) * decay).ln()
}

/// Constant in front of `int Phi / int Psi` for the conditional mean.
pub fn fastpath_mean_prefactor(params: &HestonParams) -> f64 {
    4.0 * params.gamma() * params.theta()
}

/// Closed-form `Psi`, `Phi` at `(t, mu, f)`.
///
/// The Gaussian exponent is `i mu (f - alpha t - 1/(4 m^2)) - mu^2/(4 m^2)`;
/// the Dirac one is its `m -> inf` limit. For Cauchy data the multiplier is
/// `exp(-|mu|/m)` with phase `i mu (f - alpha t)`; that variant is not an exact
/// contour shift (the multiplier is not analytic at 0) and does not reproduce
/// the kernel route, so the estimator never uses it.
pub fn fastpath(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    mu: f64,
) -> Result<FastpathValues> {
    let drift = f - params.alpha() * t;
    let exponent = match *dist {
        InitialReturnDistribution::Uniform { .. } => return Err(Error::UnsupportedForUniform),
        InitialReturnDistribution::Gaussian { m } => {
            let s = 4.0 * m * m;
            Complex64::new(-mu * mu / s, mu * (drift - 1.0 / s))
        }
        InitialReturnDistribution::Dirac => Complex64::new(0.0, mu * drift),
        InitialReturnDistribution::Cauchy { m } => Complex64::new(-mu.abs() / m, mu * drift),
    };
    let lambda = lambda_shifted(params, mu);
    let log_power = params.power_exponent() * fastpath_log_power_base(params, t, lambda);
    let psi = (exponent + log_power).exp();
    let phi = psi * fastpath_ratio(params, t, lambda);
    Ok(FastpathValues { psi, phi, lambda })
}

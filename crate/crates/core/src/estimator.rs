//! Conditional moments of the variance given the return.
//!
//! For a non-uniform initial density with transform `M`,
//!
//! ```text
//! E[v | f]   = Re int e^{i mu f} M K0 (dA/dw) dmu / Re int e^{i mu f} M K0 dmu
//! E[v^2 | f] = Re int e^{i mu f} M K0 ((dA/dw)^2 + d2A/dw2) dmu / (same denominator)
//! ```
//!
//! The integrands are Hermitian in `mu`, so each integral is twice the real
//! part over the half line. The uniform case has closed forms independent of `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{fastpath, fastpath_mean_prefactor, fastpath_ratio, kernel_parts};
use crate::model::{HestonParams, InitialReturnDistribution};
use crate::quadrature::{half_line_components, integrate_real_line_full, QuadResult, Tolerances};

use num_complex::Complex64;

/// Provenance of a [`CondMomentResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ClosedForm,
    QuadratureKernel,
    QuadratureFastpath,
    Series,
    MonteCarlo,
}

impl MomentMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::QuadratureKernel => "quadrature_kernel",
            Self::QuadratureFastpath => "quadrature_fastpath",
            Self::Series => "series",
            Self::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondMomentResult {
    pub t: f64,
    pub f: f64,
    pub mean: f64,
    pub variance: Option<f64>,
    pub mean_abs_error: f64,
    pub variance_abs_error: Option<f64>,
    pub method: MomentMethod,
    /// Largest ratio of a discarded imaginary part to its real part, when
    /// the symmetry check ran.
    pub imag_residue: Option<f64>,
}

/// Integrand family used for the non-uniform cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Closed-form Riccati kernel on the real `mu` axis.
    #[default]
    Kernel,
    /// Hyperbolic `Psi`/`Phi` integrands on the contour shifted by `i/2`
    /// (Gaussian and Dirac data only).
    Fastpath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub tolerances: Tolerances,
    pub route: Route,
    /// Also integrate the imaginary parts over the full line and report the residue.
    pub symmetry_check: bool,
    /// On the fast path, re-run the kernel route for one evaluation in this many
    /// (chosen by a hash of `(t, f)`); `0` disables the check.
    pub crosscheck_period: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            route: Route::Kernel,
            symmetry_check: false,
            crosscheck_period: 100,
        }
    }
}

impl EstimatorOptions {
    pub fn with_tolerances(tolerances: Tolerances) -> Self {
        Self {
            tolerances,
            ..Self::default()
        }
    }
}

/// Closed forms for uniformly distributed initial returns.
pub fn uniform_moments(params: &HestonParams, t: f64) -> CondMomentResult {
    let decay = -(-params.gamma() * t).exp_m1();
    CondMomentResult {
        t,
        f: f64::NAN,
        mean: params.theta() * decay,
        variance: Some(params.theta() * params.k() * params.k() / (2.0 * params.gamma()) * decay * decay),
        mean_abs_error: 0.0,
        variance_abs_error: Some(0.0),
        method: MomentMethod::ClosedForm,
        imag_residue: None,
    }
}

fn check_point(t: f64, f: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    if !f.is_finite() {
        return Err(Error::InvalidArgument(format!("f must be finite, got {f}")));
    }
    Ok(())
}

/// Integrals over the real line: denominator, numerator, optional second moment.
struct Integrals {
    den: QuadResult,
    num: QuadResult,
    second: Option<QuadResult>,
    /// Factors applied to the numerator and second-moment ratios.
    num_scale: f64,
    second_scale: f64,
}

const NAMES: [&str; 3] = ["denominator", "numerator", "second-moment"];

fn collect<const N: usize>(res: Result<[QuadResult; N]>) -> Result<[QuadResult; N]> {
    let res = res.map_err(|e| Error::QuadratureFailure {
        which: "kernel",
        source: Box::new(e),
    })?;
    for (i, r) in res.iter().enumerate() {
        if !r.converged {
            return Err(Error::QuadratureFailure {
                which: NAMES[i],
                source: Box::new(Error::MaxSubdivisionsExceeded {
                    limit: r.panels_used,
                    estimate: r.value,
                    abs_error: r.abs_error_estimate,
                }),
            });
        }
    }
    Ok(res)
}

/// `[e^{i mu f} M K0, that * dA/dw, that * (dA/dw^2 + d2A/dw2)]` on the real axis.
fn kernel_integrand(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    mu: f64,
) -> [Complex64; 3] {
    let parts = kernel_parts(params, t, mu);
    // uniform never reaches here
    let m = dist.multiplier(mu).unwrap_or_default();
    let base = (parts.log_k0 + Complex64::new(0.0, mu * f)).exp() * m;
    [
        base,
        base * parts.weight1,
        base * (parts.weight1 * parts.weight1 + parts.weight2),
    ]
}

fn kernel_integrals(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    tol: &Tolerances,
    with_variance: bool,
) -> Result<Integrals> {
    let g = |mu: f64| kernel_integrand(params, dist, t, f, mu);
    if with_variance {
        let [den, num, second] = collect(half_line_components(
            |mu| {
                let v = g(mu);
                [2.0 * v[0].re, 2.0 * v[1].re, 2.0 * v[2].re]
            },
            tol,
        ))?;
        Ok(Integrals {
            den,
            num,
            second: Some(second),
            num_scale: 1.0,
            second_scale: 1.0,
        })
    } else {
        let [den, num] = collect(half_line_components(
            |mu| {
                let v = g(mu);
                [2.0 * v[0].re, 2.0 * v[1].re]
            },
            tol,
        ))?;
        Ok(Integrals {
            den,
            num,
            second: None,
            num_scale: 1.0,
            second_scale: 1.0,
        })
    }
}

fn fastpath_integrals(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    tol: &Tolerances,
    with_variance: bool,
) -> Result<Integrals> {
    if !matches!(
        dist,
        InitialReturnDistribution::Gaussian { .. } | InitialReturnDistribution::Dirac
    ) {
        return Err(Error::FastpathUnavailable);
    }
    let prefactor = fastpath_mean_prefactor(params);
    let curvature = 1.0 + params.k() * params.k() / (2.0 * params.gamma() * params.theta());
    let g = |mu: f64| {
        // dist is Gaussian or Dirac here, so this cannot fail
        let v = fastpath(params, dist, t, f, mu).expect("fast path distribution");
        let r = fastpath_ratio(params, t, v.lambda);
        [2.0 * v.psi.re, 2.0 * v.phi.re, 2.0 * v.phi.re * r]
    };
    if with_variance {
        let [den, num, second] = collect(half_line_components(g, tol))?;
        Ok(Integrals {
            den,
            num,
            second: Some(second),
            num_scale: prefactor,
            second_scale: curvature * prefactor * prefactor,
        })
    } else {
        let [den, num] = collect(half_line_components(
            |mu| {
                let v = g(mu);
                [v[0], v[1]]
            },
            tol,
        ))?;
        Ok(Integrals {
            den,
            num,
            second: None,
            num_scale: prefactor,
            second_scale: curvature * prefactor * prefactor,
        })
    }
}

/// Largest `|Im| / |Re|` over the full-line kernel integrals.
fn kernel_imag_residue(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    tol: &Tolerances,
    with_variance: bool,
) -> Result<f64> {
    let count = if with_variance { 3 } else { 2 };
    let mut worst: f64 = 0.0;
    for (idx, name) in NAMES.iter().enumerate().take(count) {
        let full = integrate_real_line_full(|mu| kernel_integrand(params, dist, t, f, mu)[idx], tol).map_err(|e| {
            Error::QuadratureFailure {
                which: name,
                source: Box::new(e),
            }
        })?;
        worst = worst.max(full.im.value.abs() / full.re.value.abs());
    }
    Ok(worst)
}

fn crosscheck_selected(t: f64, f: f64, period: u64) -> bool {
    if period == 0 {
        return false;
    }
    // splitmix64 finalizer over the bit patterns
    let mut z = t.to_bits() ^ f.to_bits().rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z.is_multiple_of(period)
}

/// Mean (and optionally variance) of `v(t)` given `f(t) = f`.
pub fn cond_moments(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    opts: &EstimatorOptions,
    with_variance: bool,
) -> Result<CondMomentResult> {
    check_point(t, f)?;
    dist.validate()?;
    opts.tolerances.validate()?;
    if dist.is_uniform() {
        let mut res = uniform_moments(params, t);
        res.f = f;
        if !with_variance {
            res.variance = None;
            res.variance_abs_error = None;
        }
        return Ok(res);
    }
    if t == 0.0 {
        // v(0) = 0 exactly
        return Ok(CondMomentResult {
            t,
            f,
            mean: 0.0,
            variance: with_variance.then_some(0.0),
            mean_abs_error: 0.0,
            variance_abs_error: with_variance.then_some(0.0),
            method: MomentMethod::ClosedForm,
            imag_residue: None,
        });
    }

    let tol = &opts.tolerances;
    let (ints, method) = match opts.route {
        Route::Kernel => (
            kernel_integrals(params, dist, t, f, tol, with_variance)?,
            MomentMethod::QuadratureKernel,
        ),
        Route::Fastpath => (
            fastpath_integrals(params, dist, t, f, tol, with_variance)?,
            MomentMethod::QuadratureFastpath,
        ),
    };

    let den = ints.den.value;
    let den_err = ints.den.abs_error_estimate;
    if den == 0.0 || den.abs() <= den_err {
        return Err(Error::DenominatorNearZero {
            value: den,
            abs_error: den_err,
        });
    }
    let ratio = |r: &QuadResult, scale: f64| {
        let value = scale * r.value / den;
        let err = (scale * r.abs_error_estimate + value.abs() * den_err) / den.abs();
        (value, err)
    };

    let (mut mean, mean_err) = ratio(&ints.num, ints.num_scale);
    if mean < 0.0 {
        if -mean <= mean_err {
            mean = 0.0;
        } else {
            return Err(Error::NegativeMeanBeyondTolerance {
                value: mean,
                abs_error: mean_err,
            });
        }
    }

    let (variance, variance_err) = match &ints.second {
        Some(second) => {
            let (second_moment, second_err) = ratio(second, ints.second_scale);
            let mut var = second_moment - mean * mean;
            let err = second_err + 2.0 * mean * mean_err;
            if var < 0.0 {
                if -var <= err {
                    var = 0.0;
                } else {
                    return Err(Error::NegativeVarianceBeyondTolerance {
                        value: var,
                        abs_error: err,
                    });
                }
            }
            (Some(var), Some(err))
        }
        None => (None, None),
    };

    if opts.route == Route::Fastpath && crosscheck_selected(t, f, opts.crosscheck_period) {
        let kernel = kernel_integrals(params, dist, t, f, tol, false)?;
        let reference = kernel.num.value / kernel.den.value;
        let allowed = 10.0 * (mean_err + tol.target(reference));
        if (reference - mean).abs() > allowed {
            return Err(Error::FastpathMismatch {
                fastpath: mean,
                kernel: reference,
            });
        }
    }

    let imag_residue = if opts.symmetry_check && opts.route == Route::Kernel {
        Some(kernel_imag_residue(params, dist, t, f, tol, with_variance)?)
    } else {
        None
    };

    Ok(CondMomentResult {
        t,
        f,
        mean,
        variance,
        mean_abs_error: mean_err,
        variance_abs_error: variance_err,
        method,
        imag_residue,
    })
}

/// `E[v(t) | f(t) = f]`.
pub fn cond_mean(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    opts: &EstimatorOptions,
) -> Result<CondMomentResult> {
    cond_moments(params, dist, t, f, opts, false)
}

/// `E[v(t) | f(t) = f]` and `Var(v(t) | f(t) = f)`.
pub fn cond_variance(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    opts: &EstimatorOptions,
) -> Result<CondMomentResult> {
    cond_moments(params, dist, t, f, opts, true)
}

/// Evaluates every `(t, f)` pair, `t` outermost; output order matches input order.
pub fn cond_moments_grid(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    ts: &[f64],
    fs: &[f64],
    opts: &EstimatorOptions,
    with_variance: bool,
) -> Vec<Result<CondMomentResult>> {
    let points: Vec<(f64, f64)> = ts.iter().flat_map(|&t| fs.iter().map(move |&f| (t, f))).collect();
    points
        .par_iter()
        .map(|&(t, f)| cond_moments(params, dist, t, f, opts, with_variance))
        .collect()
}

/// `R = f / V(t, f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rating {
    Value {
        index: f64,
        abs_error: f64,
        mean: f64,
    },
    /// `V` is below `1e-12`, including every `t = 0`.
    Undefined,
}

pub fn rating_index(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    f: f64,
    opts: &EstimatorOptions,
) -> Result<Rating> {
    let res = cond_mean(params, dist, t, f, opts)?;
    if res.mean < 1e-12 {
        return Ok(Rating::Undefined);
    }
    Ok(Rating::Value {
        index: f / res.mean,
        abs_error: f.abs() * res.mean_abs_error / (res.mean * res.mean),
        mean: res.mean,
    })
}

/// Outcome of the constant-diffusion (Ornstein-Uhlenbeck) variance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuDiagnostic {
    Applicable,
    /// Positive coefficient `k^2 t / (8 gamma^2)` of `mu^4` in the exponent of the transform.
    Divergent {
        coefficient: f64,
    },
}

/// Replacing `k sqrt(v) dW` by `k dW` makes the transform grow like
/// `exp(c mu^4)` with `c = k^2 t / (8 gamma^2)`, so the inversion integrals
/// diverge for every `t > 0`.
pub fn ou_divergence_check(params: &HestonParams, t: f64) -> Result<OuDiagnostic> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    let coefficient = params.k() * params.k() * t / (8.0 * params.gamma() * params.gamma());
    Ok(if coefficient > 0.0 {
        OuDiagnostic::Divergent { coefficient }
    } else {
        OuDiagnostic::Applicable
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig1() -> HestonParams {
        HestonParams::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn gauss(m: f64) -> InitialReturnDistribution {
        InitialReturnDistribution::gaussian(m).unwrap()
    }

    fn tight() -> EstimatorOptions {
        EstimatorOptions::with_tolerances(Tolerances::new(1e-14, 1e-12).unwrap())
    }

    #[test]
    fn uniform_examples() {
        let p = fig1();
        let r0 = uniform_moments(&p, 0.0);
        assert_eq!((r0.mean, r0.variance), (0.0, Some(0.0)));
        let r1 = uniform_moments(&p, 1.0);
        assert_relative_eq!(r1.mean, 0.632_120_558_828_557_7, max_relative = 1e-15);
        assert_relative_eq!(r1.variance.unwrap(), 0.199_788_200_446_8, max_relative = 1e-12);
        let r50 = uniform_moments(&p, 50.0);
        assert!((r50.mean - 1.0).abs() < 1e-10);
        assert!((r50.variance.unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(r1.method, MomentMethod::ClosedForm);
    }

    #[test]
    fn uniform_dispatch_is_flat_in_f() {
        let dist = InitialReturnDistribution::uniform(3.0).unwrap();
        let opts = EstimatorOptions::default();
        for f in [-2.0, 0.0, 1.7] {
            let r = cond_variance(&fig1(), &dist, 1.0, f, &opts).unwrap();
            assert_relative_eq!(r.mean, 0.632_120_558_828_557_7, max_relative = 1e-15);
            assert_relative_eq!(r.variance.unwrap(), 0.199_788_200_446_8, max_relative = 1e-12);
            assert_eq!(r.f, f);
        }
    }

    #[test]
    fn time_zero_is_exact_zero() {
        let opts = EstimatorOptions::default();
        for dist in [
            gauss(1.0),
            InitialReturnDistribution::Dirac,
            InitialReturnDistribution::Cauchy { m: 1.0 },
        ] {
            let r = cond_variance(&fig1(), &dist, 0.0, 0.3, &opts).unwrap();
            assert_eq!(r.mean, 0.0);
            assert_eq!(r.variance, Some(0.0));
        }
    }

    #[test]
    fn gaussian_small_time_value() {
        let r = cond_mean(&fig1(), &gauss(1.0), 0.01, 0.0, &tight()).unwrap();
        // series through t^5: 0.01 - 0.00005 + 0 + (7/24) 1e-8 + (7/24) 1e-10
        assert!((r.mean - 0.009_950_002_945_833).abs() < 3e-12, "{}", r.mean);
        assert!((r.mean - 0.00995).abs() < 1e-8);
        assert_eq!(r.method, MomentMethod::QuadratureKernel);
    }

    #[test]
    fn fastpath_route_agrees_with_kernel_route() {
        let p = fig1();
        for dist in [gauss(1.0), gauss(3.0), InitialReturnDistribution::Dirac] {
            for &(t, f) in &[(0.2, 0.0), (0.5, 0.5), (1.0, 1.5)] {
                let kernel = cond_variance(&p, &dist, t, f, &tight()).unwrap();
                let opts = EstimatorOptions {
                    route: Route::Fastpath,
                    ..tight()
                };
                let fast = cond_variance(&p, &dist, t, f, &opts).unwrap();
                assert_relative_eq!(fast.mean, kernel.mean, max_relative = 1e-9);
                assert_relative_eq!(fast.variance.unwrap(), kernel.variance.unwrap(), max_relative = 1e-8);
                assert_eq!(fast.method, MomentMethod::QuadratureFastpath);
            }
        }
    }

    #[test]
    fn fastpath_refuses_cauchy_and_uniform_dispatches() {
        let opts = EstimatorOptions {
            route: Route::Fastpath,
            ..EstimatorOptions::default()
        };
        let cauchy = InitialReturnDistribution::cauchy(1.0).unwrap();
        assert_eq!(
            cond_mean(&fig1(), &cauchy, 0.5, 0.0, &opts),
            Err(Error::FastpathUnavailable)
        );
    }

    #[test]
    fn cauchy_shifted_multiplier_disagrees_with_kernel() {
        // Shifting the contour is invalid for exp(-|mu|/m); the kernel route is authoritative.
        let p = fig1();
        let dist = InitialReturnDistribution::cauchy(1.0).unwrap();
        let kernel = cond_mean(&p, &dist, 0.2, 0.0, &tight()).unwrap().mean;
        let tol = Tolerances::new(1e-14, 1e-12).unwrap();
        let [psi, phi] = half_line_components(
            |mu| {
                let v = fastpath(&p, &dist, 0.2, 0.0, mu).unwrap();
                [v.psi.re, v.phi.re]
            },
            &tol,
        )
        .unwrap();
        let shifted = fastpath_mean_prefactor(&p) * phi.value / psi.value;
        assert!((shifted - kernel).abs() > 1e-4, "{shifted} vs {kernel}");
    }

    #[test]
    fn crosscheck_selection_rate() {
        let hits = (0..10_000)
            .filter(|i| crosscheck_selected(0.5, *i as f64 * 1e-3, 100))
            .count();
        assert!((50..200).contains(&hits), "{hits}");
        assert!(!crosscheck_selected(0.5, 0.0, 0));
        assert!(crosscheck_selected(0.5, 0.0, 1));
    }

    #[test]
    fn symmetry_residue_is_small() {
        let opts = EstimatorOptions {
            symmetry_check: true,
            ..tight()
        };
        let r = cond_variance(&fig1(), &gauss(1.0), 0.5, 0.7, &opts).unwrap();
        assert!(r.imag_residue.unwrap() <= 1e-8);
    }

    #[test]
    fn variance_is_nonnegative_and_second_moment_dominates() {
        let opts = EstimatorOptions::default();
        for dist in [
            gauss(1.0),
            InitialReturnDistribution::Dirac,
            InitialReturnDistribution::Cauchy { m: 1.0 },
        ] {
            // points inside the bulk of f(t) even for the point-mass start
            for &(t, f) in &[(0.1, 0.1), (0.5, 0.5), (1.0, 2.0)] {
                let r = cond_variance(&fig1(), &dist, t, f, &opts).unwrap();
                assert!(r.mean >= 0.0);
                assert!(r.variance.unwrap() >= -r.variance_abs_error.unwrap());
            }
        }
    }

    #[test]
    fn rating_examples() {
        let opts = EstimatorOptions::default();
        match rating_index(&fig1(), &gauss(1.0), 0.7, 0.0, &opts).unwrap() {
            Rating::Value { index, .. } => assert_eq!(index, 0.0),
            Rating::Undefined => panic!("defined for t > 0"),
        }
        assert_eq!(
            rating_index(&fig1(), &gauss(1.0), 0.0, 0.5, &opts).unwrap(),
            Rating::Undefined
        );
    }

    #[test]
    fn rating_is_not_monotone_in_return() {
        let opts = EstimatorOptions::default();
        // V(1, .) is symmetric about f = 1.25, so f / V only turns over near f = 4
        let fs: Vec<f64> = (0..33).map(|i| -2.0 + 0.25 * i as f64).collect();
        let rs: Vec<f64> = fs
            .iter()
            .map(|&f| match rating_index(&fig1(), &gauss(1.0), 1.0, f, &opts).unwrap() {
                Rating::Value { index, .. } => index,
                Rating::Undefined => f64::NAN,
            })
            .collect();
        let rising = rs.windows(2).any(|w| w[1] > w[0]);
        let falling = rs.windows(2).any(|w| w[1] < w[0]);
        assert!(rising && falling, "{rs:?}");
    }

    #[test]
    fn ou_examples() {
        let p = fig1();
        assert_eq!(
            ou_divergence_check(&p, 1.0).unwrap(),
            OuDiagnostic::Divergent { coefficient: 0.125 }
        );
        assert_eq!(ou_divergence_check(&p, 0.0).unwrap(), OuDiagnostic::Applicable);
        let p = HestonParams::new(4.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(
            ou_divergence_check(&p, 2.0).unwrap(),
            OuDiagnostic::Divergent {
                coefficient: 1.0 / 16.0
            }
        );
    }

    #[test]
    fn grid_preserves_order() {
        let opts = EstimatorOptions::default();
        let res = cond_moments_grid(&fig1(), &gauss(1.0), &[0.3, 0.6], &[-0.5, 0.0, 0.5], &opts, false);
        let coords: Vec<(f64, f64)> = res
            .iter()
            .map(|r| {
                let r = r.as_ref().unwrap();
                (r.t, r.f)
            })
            .collect();
        assert_eq!(
            coords,
            vec![(0.3, -0.5), (0.3, 0.0), (0.3, 0.5), (0.6, -0.5), (0.6, 0.0), (0.6, 0.5)]
        );
    }
}

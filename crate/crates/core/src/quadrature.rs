//! Adaptive Gauss-Kronrod quadrature on the real line.
//!
//! The half line `[0, inf)` is mapped onto `(0, 1]` by `mu = (1 - u) / u`
//! and integrated with a globally adaptive 15/7-point Gauss-Kronrod scheme:
//! the panel with the largest error estimate is bisected until the summed
//! error meets the tolerance. The 15-point rule has no endpoint nodes, so the
//! integrand is never evaluated at `u = 0`.
//!
//! Panels are summed in left-endpoint order once the refinement stops, so the
//! result does not depend on the order in which panels were split.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kronrod abscissae on `[-1, 1]`, descending; the last one is the center.
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

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5]` and the center.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Panels the half line is split into before adaptive refinement starts.
const INITIAL_PANELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 200,
        }
    }
}

impl Tolerances {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.abs_tol) || !ok(self.rel_tol) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions < INITIAL_PANELS {
            return Err(Error::InvalidArgument(format!(
                "max_subdivisions must be at least {INITIAL_PANELS}"
            )));
        }
        Ok(())
    }

    pub(crate) fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
    pub converged: bool,
}

impl QuadResult {
    fn into_result(self, limit: usize) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxSubdivisionsExceeded {
                limit,
                estimate: self.value,
                abs_error: self.abs_error_estimate,
            })
        }
    }
}

/// One application of the 15/7 pair on a panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelEstimate {
    pub value: f64,
    pub error: f64,
}

fn rescale_error(raw: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = raw.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

/// Evaluates the 15/7 pair for `N` integrand components sharing one set of nodes.
fn panel_vec<const N: usize, G>(g: &G, a: f64, b: f64) -> std::result::Result<[PanelEstimate; N], f64>
where
    G: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut samples = [[0.0; N]; 15];
    let mut nodes = [0.0; 15];
    nodes[7] = center;
    for j in 0..7 {
        nodes[j] = center - half * XGK[j];
        nodes[14 - j] = center + half * XGK[j];
    }
    for (x, s) in nodes.iter().zip(samples.iter_mut()) {
        *s = g(*x);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(*x);
        }
    }

    let mut out = [PanelEstimate { value: 0.0, error: 0.0 }; N];
    for (c, est) in out.iter_mut().enumerate() {
        let fc = samples[7][c];
        let mut kronrod = fc * WGK[7];
        let mut gauss = fc * WG[3];
        let mut resabs = fc.abs() * WGK[7];
        for j in 0..7 {
            let (lo, hi) = (samples[j][c], samples[14 - j][c]);
            kronrod += WGK[j] * (lo + hi);
            resabs += WGK[j] * (lo.abs() + hi.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (lo + hi);
            }
        }
        let mean = 0.5 * kronrod;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((samples[j][c] - mean).abs() + (samples[14 - j][c] - mean).abs());
        }
        let scale = half.abs();
        *est = PanelEstimate {
            value: kronrod * half,
            error: rescale_error((kronrod - gauss) * half, resabs * scale, resasc * scale),
        };
    }
    Ok(out)
}

/// 15-point Kronrod value with the embedded 7-point Gauss error estimate on `[a, b]`.
pub fn panel_rule<G: Fn(f64) -> f64>(g: G, a: f64, b: f64) -> PanelEstimate {
    match panel_vec(&|x| [g(x)], a, b) {
        Ok([est]) => est,
        Err(_) => PanelEstimate {
            value: f64::NAN,
            error: f64::INFINITY,
        },
    }
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    est: [PanelEstimate; N],
    splittable: bool,
}

/// Globally adaptive integration of `N` components over `[a, b]`.
///
/// Never fails on the subdivision cap; the returned results carry
/// `converged = false` instead. Non-finite samples abort with the node that
/// produced them.
fn adaptive<const N: usize, G>(g: &G, a: f64, b: f64, tol: &Tolerances) -> std::result::Result<[QuadResult; N], f64>
where
    G: Fn(f64) -> [f64; N],
{
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut panels: Vec<Panel<N>> = Vec::with_capacity(tol.max_subdivisions);
    for i in 0..INITIAL_PANELS {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
        panels.push(Panel {
            a: lo,
            b: hi,
            est: panel_vec(g, lo, hi)?,
            splittable: true,
        });
    }

    let totals = |panels: &[Panel<N>]| {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for p in panels {
            for c in 0..N {
                value[c] += p.est[c].value;
                error[c] += p.est[c].error;
            }
        }
        (value, error)
    };

    loop {
        let (value, error) = totals(&panels);
        let done = (0..N).all(|c| error[c] <= tol.target(value[c]));
        if done || panels.len() >= tol.max_subdivisions {
            break;
        }
        // worst panel relative to each component's tolerance
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .map(|(i, p)| {
                let score = (0..N)
                    .map(|c| p.est[c].error / tol.target(value[c]))
                    .fold(0.0, f64::max);
                (i, score)
            })
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((idx, _)) = worst else { break };

        let (lo, hi) = (panels[idx].a, panels[idx].b);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) || (hi - lo) <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            panels[idx].splittable = false;
            continue;
        }
        let left = panel_vec(g, lo, mid)?;
        let right = panel_vec(g, mid, hi)?;
        panels[idx] = Panel {
            a: lo,
            b: mid,
            est: left,
            splittable: true,
        };
        panels.push(Panel {
            a: mid,
            b: hi,
            est: right,
            splittable: true,
        });
    }

    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let (value, error) = totals(&panels);
    let mut out = [QuadResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        panels_used: panels.len(),
        converged: false,
    }; N];
    for c in 0..N {
        out[c].value = value[c];
        out[c].abs_error_estimate = error[c];
        out[c].converged = error[c] <= tol.target(value[c]);
    }
    Ok(out)
}

/// Integrates the `N` components of `g` over `[0, inf)`, reporting
/// non-converged components through the `converged` flag.
pub fn half_line_components<const N: usize, G>(g: G, tol: &Tolerances) -> Result<[QuadResult; N]>
where
    G: Fn(f64) -> [f64; N],
{
    tol.validate()?;
    let mapped = |u: f64| {
        let mu = (1.0 - u) / u;
        let jac = 1.0 / (u * u);
        let mut v = g(mu);
        for x in v.iter_mut() {
            // decaying integrands underflow to 0 while the Jacobian blows up
            *x = if *x == 0.0 { 0.0 } else { *x * jac };
        }
        v
    };
    adaptive(&mapped, 0.0, 1.0, tol).map_err(|u| Error::NonFiniteIntegrand((1.0 - u) / u))
}

/// `int_0^inf g(mu) dmu`.
pub fn integrate_half_line<G: Fn(f64) -> f64>(g: G, tol: &Tolerances) -> Result<QuadResult> {
    let [res] = half_line_components(|mu| [g(mu)], tol)?;
    res.into_result(tol.max_subdivisions)
}

/// `int_a^b g(x) dx` for finite `a < b`.
pub fn integrate_interval<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, tol: &Tolerances) -> Result<QuadResult> {
    tol.validate()?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!("need finite a < b, got [{a}, {b}]")));
    }
    let [res] = adaptive(&|x| [g(x)], a, b, tol).map_err(Error::NonFiniteIntegrand)?;
    res.into_result(tol.max_subdivisions)
}

/// `int_R g(mu) dmu` for `g(-mu) = conj(g(mu))`, computed as `2 int_0^inf Re g`.
pub fn integrate_real_line_hermitian<G: Fn(f64) -> Complex64>(g: G, tol: &Tolerances) -> Result<QuadResult> {
    let [res] = half_line_components(|mu| [2.0 * g(mu).re], tol)?;
    res.into_result(tol.max_subdivisions)
}

/// Real and imaginary parts of `int_R g(mu) dmu` without assuming any symmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexQuadResult {
    pub re: QuadResult,
    pub im: QuadResult,
}

pub fn integrate_real_line_full<G: Fn(f64) -> Complex64>(g: G, tol: &Tolerances) -> Result<ComplexQuadResult> {
    let [re, im] = half_line_components(
        |mu| {
            let s = g(mu) + g(-mu);
            [s.re, s.im]
        },
        tol,
    )?;
    Ok(ComplexQuadResult {
        re: re.into_result(tol.max_subdivisions)?,
        // the imaginary part is ~0 for symmetric integrands; only its size matters
        im,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tight() -> Tolerances {
        Tolerances::new(1e-13, 1e-12).unwrap()
    }

    #[test]
    fn gaussian_integral() {
        let r =
            integrate_real_line_hermitian(|mu| Complex64::new((-mu * mu).exp(), 0.0), &Tolerances::default()).unwrap();
        assert!((r.value - PI.sqrt()).abs() <= 1e-10, "{}", r.value);
        assert!(r.converged);
    }

    #[test]
    fn cauchy_integral() {
        let r = integrate_real_line_hermitian(|mu| Complex64::new(1.0 / (1.0 + mu * mu), 0.0), &Tolerances::default())
            .unwrap();
        assert!((r.value - PI).abs() <= 1e-10, "{}", r.value);
    }

    #[test]
    fn oscillatory_gaussian_cancels() {
        let r = integrate_real_line_hermitian(
            |mu| Complex64::new(0.0, 10.0 * mu).exp() * (-mu * mu).exp(),
            &Tolerances::new(1e-13, 1e-8).unwrap(),
        )
        .unwrap();
        let exact = PI.sqrt() * (-25.0f64).exp();
        assert!((r.value - exact).abs() <= 1e-13, "{} vs {exact}", r.value);
    }

    #[test]
    fn panel_rule_examples() {
        let one = panel_rule(|_| 1.0, 0.0, 1.0);
        assert_relative_eq!(one.value, 1.0, max_relative = 1e-15);
        assert!(one.error < 1e-13);
        let lin = panel_rule(|x| x, 0.0, 2.0);
        assert_relative_eq!(lin.value, 2.0, max_relative = 1e-15);
        assert!(lin.error < 1e-13);
        let kink = panel_rule(|x| (x - 0.5f64).abs(), 0.0, 1.0);
        assert!(kink.error > 0.0);
        let r = integrate_interval(|x| (x - 0.5f64).abs(), 0.0, 1.0, &tight()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate_half_line(|mu| if mu > 3.0 { f64::NAN } else { 1.0 }, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand(mu) if mu > 3.0));
    }

    #[test]
    fn cap_exceeded_carries_best_estimate() {
        let tol = Tolerances {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_subdivisions: 10,
        };
        let err = integrate_half_line(|mu| (mu.sin() / (1.0 + mu)).powi(2), &tol).unwrap_err();
        match err {
            Error::MaxSubdivisionsExceeded {
                limit,
                estimate,
                abs_error,
            } => {
                assert_eq!(limit, 10);
                assert!(estimate.is_finite() && abs_error > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hermitian_reduction_matches_full_line() {
        let cases: Vec<Box<dyn Fn(f64) -> Complex64>> = vec![
            Box::new(|mu: f64| Complex64::new(0.0, 1.3 * mu).exp() * (-0.5 * mu * mu).exp()),
            Box::new(|mu: f64| Complex64::new(0.0, -0.7 * mu).exp() / (1.0 + mu.powi(4))),
            Box::new(|mu: f64| Complex64::new(-mu.abs(), 2.0 * mu).exp()),
        ];
        for g in &cases {
            // the mapped tail of the algebraic case oscillates without end near u = 0,
            // so this stays at the default tolerances
            let half = integrate_real_line_hermitian(g, &Tolerances::default()).unwrap();
            let full = integrate_real_line_full(g, &Tolerances::default()).unwrap();
            assert_relative_eq!(half.value, full.re.value, max_relative = 1e-8);
            assert!(full.im.value.abs() <= 1e-8 * full.re.value.abs());
        }
    }

    #[test]
    fn refinement_is_monotone_on_kernel_integrands() {
        use crate::kernel::fastpath;
        use crate::model::{HestonParams, InitialReturnDistribution};
        let p = HestonParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let dist = InitialReturnDistribution::gaussian(1.0).unwrap();
        for (t, f) in [(0.5, 0.0), (1.0, 1.5)] {
            let mut previous = f64::INFINITY;
            for cap in 8..60 {
                let tol = Tolerances {
                    abs_tol: 1e-300,
                    rel_tol: 1e-300,
                    max_subdivisions: cap,
                };
                let [psi, phi] = half_line_components(
                    |mu| {
                        let v = fastpath(&p, &dist, t, f, mu).unwrap();
                        [v.psi.re, v.phi.re]
                    },
                    &tol,
                )
                .unwrap();
                let total = psi.abs_error_estimate + phi.abs_error_estimate;
                assert!(total <= previous * (1.0 + 1e-12), "cap {cap}: {total} > {previous}");
                previous = total;
            }
        }
    }

    proptest! {
        #[test]
        fn kronrod_panel_is_exact_for_polynomials(
            coeffs in prop::collection::vec(-3.0f64..3.0, 23),
            a in -5.0f64..5.0,
            w in 0.01f64..4.0,
        ) {
            // the 15-point Kronrod rule integrates degree 22 exactly
            let b = a + w;
            let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let antideriv = |x: f64| {
                coeffs.iter().enumerate().rev().fold(0.0, |acc, (i, c)| acc * x + c / (i + 1) as f64) * x
            };
            let exact = antideriv(b) - antideriv(a);
            let scale: f64 = (0..=22)
                .map(|i| coeffs[i].abs() * a.abs().max(b.abs()).powi(i as i32 + 1))
                .sum();
            let est = panel_rule(poly, a, b);
            prop_assert!((est.value - exact).abs() <= 1e-13 * scale.max(1.0));
        }
    }
}

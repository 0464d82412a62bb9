//! Small-time expansion of the conditional mean for Gaussian initial returns.
//!
//! ```text
//! V(t, f) = g th t - g^2 th t^2 / 2
//!         + g th (g^2 + 2 f^2 m^4 k^2 - f m^2 k^2 - m^2 k^2) t^3 / 6
//!         - c g th (8 g k^2 f^2 m^4 - 4 (g + 4 m^2 a) k^2 m^2 f - 4 (g + a) m^2 k^2 + g^3) t^4
//!         + O(t^5)
//! ```
//!
//! with `c = 1/24`. Term-by-term integration of the kernel series and
//! Richardson extrapolation of the quadrature values both give `1/24`; the
//! `1/6` variant is kept selectable for comparison only.

use crate::error::{Error, Result};
use crate::estimator::{cond_mean, EstimatorOptions};
use crate::model::{HestonParams, InitialReturnDistribution};

/// Prefactor of the `t^4` polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuarticPrefactor {
    /// `1/24`, confirmed by extrapolation.
    #[default]
    OneTwentyFourth,
    /// `1/6`.
    OneSixth,
}

impl QuarticPrefactor {
    pub fn value(&self) -> f64 {
        match self {
            Self::OneTwentyFourth => 1.0 / 24.0,
            Self::OneSixth => 1.0 / 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorEval {
    pub order: usize,
    pub value: f64,
    /// Contribution of each power `t^1 ..= t^order`.
    pub terms: Vec<f64>,
}

/// Coefficients of `t^1 ..= t^4`.
pub fn taylor_coefficients(params: &HestonParams, m: f64, f: f64, quartic: QuarticPrefactor) -> [f64; 4] {
    let (g, k2, th, a) = (params.gamma(), params.k() * params.k(), params.theta(), params.alpha());
    let m2 = m * m;
    let m4 = m2 * m2;
    let c1 = g * th;
    let c2 = -0.5 * g * g * th;
    let c3 = g * th * (g * g + 2.0 * f * f * m4 * k2 - f * m2 * k2 - m2 * k2) / 6.0;
    // the linear-in-f part `-4 (g - 4 m^2 a)` puts the vertex at `taylor_argmin`
    let c4 = -quartic.value()
        * g
        * th
        * (8.0 * g * k2 * f * f * m4 - 4.0 * (g - 4.0 * m2 * a) * k2 * m2 * f - 4.0 * (g + a) * m2 * k2 + g * g * g);
    [c1, c2, c3, c4]
}

pub fn taylor_cond_mean_with(
    params: &HestonParams,
    m: f64,
    t: f64,
    f: f64,
    order: usize,
    quartic: QuarticPrefactor,
) -> Result<TaylorEval> {
    if !(1..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::NonPositiveParameter { name: "m", value: m });
    }
    let coeffs = taylor_coefficients(params, m, f, quartic);
    let terms: Vec<f64> = coeffs
        .iter()
        .take(order)
        .enumerate()
        .map(|(i, c)| c * t.powi(i as i32 + 1))
        .collect();
    Ok(TaylorEval {
        order,
        value: terms.iter().sum(),
        terms,
    })
}

/// Truncated expansion of `V(t, f)` for Gaussian data of width `m`.
pub fn taylor_cond_mean(params: &HestonParams, m: f64, t: f64, f: f64, order: usize) -> Result<TaylorEval> {
    taylor_cond_mean_with(params, m, t, f, order, QuarticPrefactor::default())
}

/// Minimum of the order-4 expansion, which is quadratic in `f`:
/// `(4 m^2 a t - g t + 1) / (4 m^2 (1 - g t))`.
pub fn taylor_argmin(params: &HestonParams, m: f64, t: f64) -> Result<f64> {
    let g = params.gamma();
    let limit = 1.0 / g;
    if !(t > 0.0 && t < limit) {
        return Err(Error::OutsideValidityWindow { t, limit });
    }
    let m2 = m * m;
    Ok((4.0 * m2 * params.alpha() * t - g * t + 1.0) / (4.0 * m2 * (1.0 - g * t)))
}

/// Heuristic range where the truncated series is trusted: `t max(g, k m, a) <= 0.1`.
pub fn series_valid(params: &HestonParams, m: f64, t: f64) -> bool {
    t * params.gamma().max(params.k() * m).max(params.alpha()) <= 0.1
}

/// Large-`|f|` behavior of the Cauchy-data expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyTail {
    /// `(k^2/8 - g^2) / (2 f^2)`, the tail of the `t^3` rational coefficient.
    pub c3_tail: f64,
    /// `16 f^4 (2 g^2 - k^2) / 3`, the tail of the `t^4` rational coefficient.
    pub c4_tail: f64,
    /// `(g th, -g^2 th / 2)`, shared with the Gaussian case.
    pub leading: (f64, f64),
}

pub fn cauchy_asymptotic_coeffs(params: &HestonParams, f: f64) -> CauchyTail {
    let (g, k2, th) = (params.gamma(), params.k() * params.k(), params.theta());
    CauchyTail {
        c3_tail: (k2 / 8.0 - g * g) / (2.0 * f * f),
        c4_tail: 16.0 * f.powi(4) / 3.0 * (2.0 * g * g - k2),
        leading: (g * th, -0.5 * g * g * th),
    }
}

/// Low-order coefficients recovered from quadrature values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolatedCoefficients {
    pub cubic: f64,
    pub quartic: f64,
}

/// Recovers the `t^3` and `t^4` coefficients of `V(t, f)` from the quadrature
/// values at `t0, t0/2, ..., t0/2^(levels+1)`.
///
/// With the universal orders removed, `r(t) = (V - g th t + g^2 th t^2 / 2) / t^3`
/// is `c3 + c4 t + c5 t^2 + ...`. Both `r` and the divided difference
/// `(r(t) - r(t/2)) / (t/2) = c4 + (3/2) c5 t + ...` are extrapolated to `t = 0`
/// by a Richardson table with ratio 2.
pub fn richardson_coefficients(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    f: f64,
    t0: f64,
    levels: usize,
    opts: &EstimatorOptions,
) -> Result<ExtrapolatedCoefficients> {
    if levels == 0 || t0.is_nan() || t0 <= 0.0 {
        return Err(Error::InvalidArgument("need t0 > 0 and at least one level".into()));
    }
    let (g, th) = (params.gamma(), params.theta());
    let ts: Vec<f64> = (0..levels + 2).map(|i| t0 / f64::from(1u32 << i)).collect();
    let residuals = ts
        .iter()
        .map(|&t| {
            let v = cond_mean(params, dist, t, f, opts)?.mean;
            Ok((v - g * th * t + 0.5 * g * g * th * t * t) / t.powi(3))
        })
        .collect::<Result<Vec<f64>>>()?;
    let slopes: Vec<f64> = residuals
        .windows(2)
        .zip(&ts)
        .map(|(r, &t)| (r[0] - r[1]) / (0.5 * t))
        .collect();
    Ok(ExtrapolatedCoefficients {
        cubic: richardson(&residuals),
        quartic: richardson(&slopes),
    })
}

/// Eliminates successive powers of `h` from values at `h, h/2, h/4, ...`.
fn richardson(values: &[f64]) -> f64 {
    let mut table = values.to_vec();
    let mut factor = 2.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 2.0;
    }
    table[0]
}

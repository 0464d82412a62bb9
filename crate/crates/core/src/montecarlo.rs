//! Path simulation of the return/variance system and kernel regression of
//! terminal variance on terminal return.
//!
//! Every path draws from its own ChaCha8 stream `(seed, path index)`, and
//! paths are collected in index order, so a sample depends only on the seed
//! and never on how rayon schedules the work.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HestonParams, InitialReturnDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler with `max(v, 0)` in both the drift and the diffusion of `v`.
    #[default]
    FullTruncationEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// `1.06 * s * n^(-1/5)` with the robust spread `s = min(stdev, IQR / 1.34)`.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub bandwidth: Bandwidth,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            n_steps: 1000,
            seed: 0x5eed,
            scheme: Scheme::FullTruncationEuler,
            bandwidth: Bandwidth::Auto,
        }
    }
}

impl McConfig {
    pub const MIN_PATHS: usize = 1000;
    pub const MIN_STEPS: usize = 100;

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < Self::MIN_PATHS {
            return Err(Error::InvalidArgument(format!(
                "n_paths must be at least {}, got {}",
                Self::MIN_PATHS,
                self.n_paths
            )));
        }
        if self.n_steps < Self::MIN_STEPS {
            return Err(Error::InvalidArgument(format!(
                "n_steps must be at least {}, got {}",
                Self::MIN_STEPS,
                self.n_steps
            )));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McMeta {
    pub params: HestonParams,
    pub dist: InitialReturnDistribution,
    pub t: f64,
    pub config: McConfig,
}

/// Terminal `(f, v)` pairs, one per path, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    pub pairs: Vec<(f64, f64)>,
    pub meta: McMeta,
}

/// Unconditional moments of the terminal variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

impl McSample {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn variance_moments(&self) -> SampleMoments {
        let n = self.pairs.len() as f64;
        let mean = self.pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &(_, v) in &self.pairs {
            let d2 = (v - mean) * (v - mean);
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= n;
        m4 /= n;
        SampleMoments {
            mean,
            variance: m2 * n / (n - 1.0),
            se_mean: (m2 / n).sqrt(),
            se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        }
    }

    /// Raw dump: header `f,v`, one row per path.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "f,v")?;
        for &(f, v) in &self.pairs {
            writeln!(out, "{f:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn simulate_path(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut f = dist.sample(rng);
    let mut v: f64 = 0.0;
    if t == 0.0 {
        return (f, 0.0);
    }
    let dt = t / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let (g, k, th, a) = (params.gamma(), params.k(), params.theta(), params.alpha());
    for _ in 0..n_steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let vp = v.max(0.0);
        let vol = vp.sqrt();
        f += (a - 0.5 * vp) * dt + vol * sqrt_dt * z1;
        v += g * (th - vp) * dt + k * vol * sqrt_dt * z2;
    }
    (f, v.max(0.0))
}

/// Simulates `n_paths` independent paths to time `t` starting from `v = 0`
/// and `f` drawn from `dist`.
pub fn simulate_terminal(
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    t: f64,
    config: &McConfig,
) -> Result<McSample> {
    config.validate()?;
    dist.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    let pairs = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(params, dist, t, config.n_steps, &mut path_rng(config.seed, i)))
        .collect();
    Ok(McSample {
        pairs,
        meta: McMeta {
            params: *params,
            dist: *dist,
            t,
            config: *config,
        },
    })
}

/// Kernel-regression estimate at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalPoint {
    pub f: f64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub effective_n: f64,
    /// Set when fewer than [`MIN_EFFECTIVE_N`] effective observations support the point.
    pub insufficient_local_data: bool,
}

pub const MIN_EFFECTIVE_N: f64 = 30.0;

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rule-of-thumb Gaussian-kernel bandwidth for the terminal returns.
pub fn auto_bandwidth(sample: &McSample) -> f64 {
    let n = sample.pairs.len() as f64;
    let mean = sample.pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let sd = (sample.pairs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut fs: Vec<f64> = sample.pairs.iter().map(|p| p.0).collect();
    fs.sort_by(f64::total_cmp);
    let iqr = quantile(&fs, 0.75) - quantile(&fs, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    1.06 * spread * n.powf(-0.2)
}

/// Nadaraya-Watson estimates of `E[v | f]` and `Var(v | f)` with Gaussian weights.
pub fn conditional_moments(sample: &McSample, f_grid: &[f64], bandwidth: Bandwidth) -> Result<Vec<ConditionalPoint>> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty Monte Carlo sample".into()));
    }
    let h = match bandwidth {
        Bandwidth::Auto => auto_bandwidth(sample),
        Bandwidth::Fixed(h) if h.is_finite() && h > 0.0 => h,
        Bandwidth::Fixed(h) => {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
    };
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument("degenerate sample: zero bandwidth".into()));
    }
    let cutoff = 10.0 * h;
    Ok(f_grid
        .par_iter()
        .map(|&f| {
            let weight = |x: f64| {
                let z = (x - f) / h;
                if (x - f).abs() > cutoff {
                    0.0
                } else {
                    (-0.5 * z * z).exp()
                }
            };
            let (mut sw, mut sw2, mut swv) = (0.0, 0.0, 0.0);
            for &(x, v) in &sample.pairs {
                let w = weight(x);
                sw += w;
                sw2 += w * w;
                swv += w * v;
            }
            if sw == 0.0 {
                return ConditionalPoint {
                    f,
                    mean: f64::NAN,
                    variance: f64::NAN,
                    se_mean: f64::NAN,
                    se_variance: f64::NAN,
                    effective_n: 0.0,
                    insufficient_local_data: true,
                };
            }
            let mean = swv / sw;
            let (mut m2, mut m4) = (0.0, 0.0);
            for &(x, v) in &sample.pairs {
                let w = weight(x);
                let d2 = (v - mean) * (v - mean);
                m2 += w * d2;
                m4 += w * d2 * d2;
            }
            m2 /= sw;
            m4 /= sw;
            let effective_n = sw * sw / sw2;
            ConditionalPoint {
                f,
                mean,
                variance: m2,
                se_mean: (m2 / effective_n).sqrt(),
                se_variance: ((m4 - m2 * m2).max(0.0) / effective_n).sqrt(),
                effective_n,
                insufficient_local_data: effective_n < MIN_EFFECTIVE_N,
            }
        })
        .collect())
}

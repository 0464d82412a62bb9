//! Batch front end: configuration, grid evaluation and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    cond_moments_grid, ou_divergence_check, rating_index, CondMomentResult, EstimatorOptions, OuDiagnostic, Rating,
    Route,
};
use crate::model::{HestonParams, InitialReturnDistribution};
use crate::montecarlo::{conditional_moments, simulate_terminal, Bandwidth, McConfig, Scheme};
use crate::quadrature::Tolerances;
use crate::series::{series_valid, taylor_argmin, taylor_cond_mean};

pub const CSV_HEADER: &str = "method,t,f,mean,mean_err,variance,variance_err,flag";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INAPPLICABLE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Eval,
    Series,
    Mc,
    Compare,
    Rating,
    CheckOu,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Eval => "eval",
            Self::Series => "series",
            Self::Mc => "mc",
            Self::Compare => "compare",
            Self::Rating => "rating",
            Self::CheckOu => "check-ou",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub k: f64,
    pub theta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Uniform,
    Gaussian,
    Dirac,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub kind: DistKind,
    /// Width parameter of the Gaussian and Cauchy densities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Half-width `L` of the uniform density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub f_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Absent means the rule-of-thumb bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

/// Everything a run needs; parsed from TOML and/or flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Also report the conditional variance in `eval` and `rating`.
    #[serde(default)]
    pub with_variance: bool,
    /// Worker threads; absent means one per core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Raw `f,v` dump of every Monte Carlo sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_samples: Option<PathBuf>,
    pub t: Vec<f64>,
    pub params: ParamsConfig,
    pub distribution: DistConfig,
    pub grid: GridConfig,
    pub tolerances: TolConfig,
    pub mc: McSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        let mc = McConfig::default();
        Self {
            command: Command::Eval,
            out: None,
            with_variance: false,
            workers: None,
            dump_samples: None,
            t: vec![0.5],
            params: ParamsConfig {
                gamma: 1.0,
                k: 1.0,
                theta: 1.0,
                alpha: 1.0,
            },
            distribution: DistConfig {
                kind: DistKind::Gaussian,
                m: Some(1.0),
                half_width: None,
            },
            grid: GridConfig {
                f_min: -1.0,
                f_max: 2.0,
                f_count: 41,
            },
            tolerances: TolConfig {
                abs_tol: tol.abs_tol,
                rel_tol: tol.rel_tol,
                max_subdivisions: tol.max_subdivisions,
            },
            mc: McSettings {
                paths: mc.n_paths,
                steps: mc.n_steps,
                seed: mc.seed,
                bandwidth: None,
            },
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn heston(&self) -> Result<HestonParams> {
        let p = &self.params;
        HestonParams::new(p.gamma, p.k, p.theta, p.alpha)
    }

    pub fn dist(&self) -> Result<InitialReturnDistribution> {
        let d = &self.distribution;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("distribution `{}` needs `{name}`", d.kind.as_str())))
        };
        match d.kind {
            DistKind::Uniform => InitialReturnDistribution::uniform(need(d.half_width, "half_width")?),
            DistKind::Gaussian => InitialReturnDistribution::gaussian(need(d.m, "m")?),
            DistKind::Dirac => Ok(InitialReturnDistribution::Dirac),
            DistKind::Cauchy => InitialReturnDistribution::cauchy(need(d.m, "m")?),
        }
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        let t = Tolerances {
            abs_tol: self.tolerances.abs_tol,
            rel_tol: self.tolerances.rel_tol,
            max_subdivisions: self.tolerances.max_subdivisions,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        let cfg = McConfig {
            n_paths: self.mc.paths,
            n_steps: self.mc.steps,
            seed: self.mc.seed,
            scheme: Scheme::FullTruncationEuler,
            bandwidth: self.mc.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Evenly spaced returns from `f_min` to `f_max` inclusive.
    pub fn f_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        if g.f_count == 1 {
            return vec![g.f_min];
        }
        let step = (g.f_max - g.f_min) / (g.f_count - 1) as f64;
        (0..g.f_count)
            .map(|i| {
                if i + 1 == g.f_count {
                    g.f_max
                } else {
                    g.f_min + step * i as f64
                }
            })
            .collect()
    }

    /// Checks every field that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.heston()?;
        self.dist()?;
        self.tolerances()?;
        if self.t.is_empty() {
            return Err(Error::Config("`t` must list at least one time".into()));
        }
        if let Some(&t) = self.t.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Config(format!("times must be finite and >= 0, got {t}")));
        }
        let g = &self.grid;
        if g.f_count == 0 || !(g.f_min.is_finite() && g.f_max.is_finite()) || g.f_min > g.f_max {
            return Err(Error::Config(format!(
                "need finite f_min <= f_max and f_count >= 1, got [{}, {}] x {}",
                g.f_min, g.f_max, g.f_count
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if matches!(self.command, Command::Mc | Command::Compare) {
            self.mc_config()?;
        }
        Ok(())
    }
}

impl DistKind {
    fn as_str(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Gaussian => "gaussian",
            Self::Dirac => "dirac",
            Self::Cauchy => "cauchy",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "heston-condvar",
    version,
    about = "Conditional moments of Heston variance given the return"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Conditional mean (and variance) on the (t, f) grid by quadrature
    Eval(Overrides),
    /// Small-time series values and the series argmin
    Series(Overrides),
    /// Monte Carlo estimates with standard errors
    Mc(Overrides),
    /// Quadrature, Monte Carlo and series side by side
    Compare(Overrides),
    /// Rating index f / V(t, f)
    Rating(Overrides),
    /// Divergence diagnostic for the constant-diffusion variance model
    CheckOu(Overrides),
}

impl CliCommand {
    pub fn split(self) -> (Command, Overrides) {
        match self {
            Self::Eval(o) => (Command::Eval, o),
            Self::Series(o) => (Command::Series, o),
            Self::Mc(o) => (Command::Mc, o),
            Self::Compare(o) => (Command::Compare, o),
            Self::Rating(o) => (Command::Rating, o),
            Self::CheckOu(o) => (Command::CheckOu, o),
        }
    }
}

/// Flags; each one that is present replaces the config-file value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub dist: Option<DistKind>,
    /// Gaussian or Cauchy width parameter
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Uniform half-width
    #[arg(long = "L", allow_negative_numbers = true)]
    pub half_width: Option<f64>,
    /// Evaluation times
    #[arg(long = "t", num_args = 1.., allow_negative_numbers = true)]
    pub t: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub f_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub f_count: Option<usize>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel bandwidth; omit for the rule-of-thumb value
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// CSV destination (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit
    #[arg(long)]
    pub dump_config: bool,
    #[arg(long)]
    pub with_variance: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the raw Monte Carlo sample as `f,v` CSV
    #[arg(long)]
    pub dump_samples: Option<PathBuf>,
}

impl Overrides {
    /// Loads the config file (if any), sets the command and applies the flags.
    pub fn resolve(&self, command: Command) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        c.command = command;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.gamma => c.params.gamma);
        set!(self.k => c.params.k);
        set!(self.theta => c.params.theta);
        set!(self.alpha => c.params.alpha);
        set!(self.dist => c.distribution.kind);
        if self.m.is_some() {
            c.distribution.m = self.m;
        }
        if self.half_width.is_some() {
            c.distribution.half_width = self.half_width;
        }
        set!(self.t => c.t);
        set!(self.f_min => c.grid.f_min);
        set!(self.f_max => c.grid.f_max);
        set!(self.f_count => c.grid.f_count);
        set!(self.abs_tol => c.tolerances.abs_tol);
        set!(self.rel_tol => c.tolerances.rel_tol);
        set!(self.paths => c.mc.paths);
        set!(self.steps => c.mc.steps);
        set!(self.seed => c.mc.seed);
        if self.bandwidth.is_some() {
            c.mc.bandwidth = self.bandwidth;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.with_variance {
            c.with_variance = true;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if self.dump_samples.is_some() {
            c.dump_samples = self.dump_samples.clone();
        }
        Ok(c)
    }
}

/// CSV text plus diagnostics for stderr and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub notes: Vec<String>,
    pub status: i32,
}

struct Row<'a> {
    method: &'a str,
    t: f64,
    f: f64,
    mean: f64,
    mean_err: f64,
    variance: Option<f64>,
    variance_err: Option<f64>,
    flag: &'a str,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Row<'_> {
    fn push(&self, csv: &mut String) {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            self.method,
            num(self.t),
            num(self.f),
            num(self.mean),
            num(self.mean_err),
            opt(self.variance),
            opt(self.variance_err),
            self.flag
        );
    }
}

fn quad_row(csv: &mut String, r: &CondMomentResult, flag: &str) {
    Row {
        method: r.method.as_str(),
        t: r.t,
        f: r.f,
        mean: r.mean,
        mean_err: r.mean_abs_error,
        variance: r.variance,
        variance_err: r.variance_abs_error,
        flag,
    }
    .push(csv);
}

fn failed_row(csv: &mut String, method: &str, t: f64, f: f64) {
    Row {
        method,
        t,
        f,
        mean: f64::NAN,
        mean_err: f64::NAN,
        variance: None,
        variance_err: None,
        flag: "failed",
    }
    .push(csv);
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::FellerViolation { .. } => EXIT_INAPPLICABLE,
        _ => EXIT_INVALID,
    }
}

fn estimator_options(config: &RunConfig) -> Result<EstimatorOptions> {
    Ok(EstimatorOptions {
        route: Route::Kernel,
        ..EstimatorOptions::with_tolerances(config.tolerances()?)
    })
}

fn gaussian_width(dist: &InitialReturnDistribution) -> Option<f64> {
    match *dist {
        InitialReturnDistribution::Gaussian { m } => Some(m),
        _ => None,
    }
}

fn sample_path(base: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("samples");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.t{index}.{ext}"),
        None => format!("{stem}.t{index}"),
    };
    base.with_file_name(name)
}

/// Monte Carlo regression at every `t`, `t` outermost.
fn mc_points(
    config: &RunConfig,
    params: &HestonParams,
    dist: &InitialReturnDistribution,
    fs: &[f64],
) -> Result<Vec<Vec<crate::montecarlo::ConditionalPoint>>> {
    let mc = config.mc_config()?;
    config
        .t
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let sample = simulate_terminal(params, dist, t, &mc)?;
            if let Some(base) = &config.dump_samples {
                let file = fs::File::create(sample_path(base, i, config.t.len()))?;
                sample.write_csv(std::io::BufWriter::new(file))?;
            }
            conditional_moments(&sample, fs, mc.bandwidth)
        })
        .collect()
}

fn eval(config: &RunConfig, params: &HestonParams, dist: &InitialReturnDistribution) -> Result<Report> {
    let fs = config.f_grid();
    let opts = estimator_options(config)?;
    let results = cond_moments_grid(params, dist, &config.t, &fs, &opts, config.with_variance);
    let mut report = report();
    let points = config.t.iter().flat_map(|&t| fs.iter().map(move |&f| (t, f)));
    for ((t, f), res) in points.zip(results) {
        match res {
            Ok(r) => quad_row(&mut report.csv, &r, "ok"),
            Err(e) => {
                failed_row(&mut report.csv, "quadrature", t, f);
                report.fail(format!("t = {t}, f = {f}: {e}"));
            }
        }
    }
    Ok(report)
}

fn series(config: &RunConfig, params: &HestonParams, dist: &InitialReturnDistribution) -> Result<Report> {
    let m = gaussian_width(dist)
        .ok_or_else(|| Error::Config("the series is available for Gaussian initial data only".into()))?;
    let fs = config.f_grid();
    let mut report = report();
    for &t in &config.t {
        let flag = if series_valid(params, m, t) {
            "valid"
        } else {
            "outside_validity"
        };
        for &f in &fs {
            let s = taylor_cond_mean(params, m, t, f, 4)?;
            Row {
                method: "series",
                t,
                f,
                mean: s.value,
                // size of the last retained term as a truncation indicator
                mean_err: s.terms[3].abs(),
                variance: None,
                variance_err: None,
                flag,
            }
            .push(&mut report.csv);
        }
        match taylor_argmin(params, m, t) {
            Ok(f) => {
                let s = taylor_cond_mean(params, m, t, f, 4)?;
                Row {
                    method: "series_argmin",
                    t,
                    f,
                    mean: s.value,
                    mean_err: s.terms[3].abs(),
                    variance: None,
                    variance_err: None,
                    flag,
                }
                .push(&mut report.csv);
            }
            Err(e) => report.notes.push(format!("t = {t}: no series argmin ({e})")),
        }
    }
    Ok(report)
}

fn mc(config: &RunConfig, params: &HestonParams, dist: &InitialReturnDistribution) -> Result<Report> {
    let fs = config.f_grid();
    let mut report = report();
    for (&t, points) in config.t.iter().zip(mc_points(config, params, dist, &fs)?) {
        for p in points {
            Row {
                method: "montecarlo",
                t,
                f: p.f,
                mean: p.mean,
                mean_err: p.se_mean,
                variance: Some(p.variance),
                variance_err: Some(p.se_variance),
                flag: if p.insufficient_local_data {
                    "insufficient_local_data"
                } else {
                    "ok"
                },
            }
            .push(&mut report.csv);
        }
    }
    Ok(report)
}

fn compare(config: &RunConfig, params: &HestonParams, dist: &InitialReturnDistribution) -> Result<Report> {
    let fs = config.f_grid();
    let opts = estimator_options(config)?;
    let quad = cond_moments_grid(params, dist, &config.t, &fs, &opts, config.with_variance);
    let sims = mc_points(config, params, dist, &fs)?;
    let width = gaussian_width(dist);
    let mut report = report();
    let mut worst: f64 = 0.0;
    let mut disagreements = 0usize;
    let mut quad = quad.into_iter();
    for (&t, points) in config.t.iter().zip(sims) {
        for p in points {
            let q = quad.next().expect("one quadrature result per grid point");
            let flag = match &q {
                Ok(r) => {
                    // agreement: |quad - mc| <= 3 se_mc
                    let z = (r.mean - p.mean).abs() / p.se_mean;
                    let z = if z.is_nan() { f64::INFINITY } else { z };
                    worst = worst.max(z);
                    if z <= 3.0 {
                        "agree"
                    } else {
                        disagreements += 1;
                        "disagree"
                    }
                }
                Err(_) => "failed",
            };
            match &q {
                Ok(r) => quad_row(&mut report.csv, r, flag),
                Err(e) => {
                    failed_row(&mut report.csv, "quadrature", t, p.f);
                    report.fail(format!("t = {t}, f = {}: {e}", p.f));
                }
            }
            Row {
                method: "montecarlo",
                t,
                f: p.f,
                mean: p.mean,
                mean_err: p.se_mean,
                variance: Some(p.variance),
                variance_err: Some(p.se_variance),
                flag,
            }
            .push(&mut report.csv);
            if let Some(m) = width {
                let s = taylor_cond_mean(params, m, t, p.f, 4)?;
                Row {
                    method: "series",
                    t,
                    f: p.f,
                    mean: s.value,
                    mean_err: s.terms[3].abs(),
                    variance: None,
                    variance_err: None,
                    flag: if series_valid(params, m, t) {
                        "valid"
                    } else {
                        "outside_validity"
                    },
                }
                .push(&mut report.csv);
            }
        }
    }
    report.notes.push(format!(
        "max normalized discrepancy |quad - mc| / se_mc = {worst:.6e} ({disagreements} point(s) disagree)"
    ));
    Ok(report)
}

fn rating(config: &RunConfig, params: &HestonParams, dist: &InitialReturnDistribution) -> Result<Report> {
    let fs = config.f_grid();
    let opts = estimator_options(config)?;
    let mut report = report();
    for &t in &config.t {
        for &f in &fs {
            match rating_index(params, dist, t, f, &opts) {
                Ok(Rating::Value { index, abs_error, .. }) => Row {
                    method: "rating",
                    t,
                    f,
                    mean: index,
                    mean_err: abs_error,
                    variance: None,
                    variance_err: None,
                    flag: "ok",
                }
                .push(&mut report.csv),
                Ok(Rating::Undefined) => Row {
                    method: "rating",
                    t,
                    f,
                    mean: f64::NAN,
                    mean_err: f64::NAN,
                    variance: None,
                    variance_err: None,
                    flag: "undefined",
                }
                .push(&mut report.csv),
                Err(e) => {
                    failed_row(&mut report.csv, "rating", t, f);
                    report.fail(format!("t = {t}, f = {f}: {e}"));
                }
            }
        }
    }
    Ok(report)
}

fn check_ou(config: &RunConfig, params: &HestonParams) -> Result<Report> {
    let mut report = report();
    for &t in &config.t {
        let (coefficient, flag) = match ou_divergence_check(params, t)? {
            OuDiagnostic::Applicable => (0.0, "applicable"),
            OuDiagnostic::Divergent { coefficient } => {
                report.notes.push(format!(
                    "constant-diffusion variance model diverges at t = {t}: mu^4 coefficient k^2 t / (8 gamma^2) = {coefficient}"
                ));
                report.status = EXIT_INAPPLICABLE;
                (coefficient, "divergent")
            }
        };
        Row {
            method: "check_ou",
            t,
            f: f64::NAN,
            mean: coefficient,
            mean_err: 0.0,
            variance: None,
            variance_err: None,
            flag,
        }
        .push(&mut report.csv);
    }
    Ok(report)
}

fn report() -> Report {
    Report {
        csv: format!("{CSV_HEADER}\n"),
        notes: Vec::new(),
        status: EXIT_OK,
    }
}

impl Report {
    fn fail(&mut self, note: String) {
        self.notes.push(note);
        if self.status == EXIT_OK {
            self.status = EXIT_INVALID;
        }
    }
}

/// Validates `config` and produces the CSV for `command` without touching the
/// file system (except for optional sample dumps).
pub fn render(command: Command, config: &RunConfig) -> Result<Report> {
    let mut config = config.clone();
    config.command = command;
    config.validate()?;
    let params = config.heston()?;
    let dist = config.dist()?;
    let work = || match command {
        Command::Eval => eval(&config, &params, &dist),
        Command::Series => series(&config, &params, &dist),
        Command::Mc => mc(&config, &params, &dist),
        Command::Compare => compare(&config, &params, &dist),
        Command::Rating => rating(&config, &params, &dist),
        Command::CheckOu => check_ou(&config, &params),
    };
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Runs `command`, writes the CSV to `config.out` or stdout and diagnostics to
/// stderr. Returns the process exit code.
pub fn run(command: Command, config: &RunConfig) -> i32 {
    let report = match render(command, config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &config.out {
        Some(path) => fs::write(path, &report.csv),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(report.csv.as_bytes())
        }
    };
    for note in &report.notes {
        eprintln!("{note}");
    }
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    report.status
}

/// Entry point shared by the binary: parse flags, resolve the configuration,
/// then dump it or run it.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (command, overrides) = cli.command.split();
    let config = match overrides.resolve(command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if overrides.dump_config {
        return match config.to_toml() {
            Ok(text) => {
                print!("{text}");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INVALID
            }
        };
    }
    run(command, &config)
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn round_trip_preserves_awkward_floats() {
        let mut c = RunConfig::default();
        c.t = vec![0.1, 1.0 / 3.0, 2.5e-7];
        c.grid.f_min = -0.7000000000000001;
        c.mc.bandwidth = Some(0.123456789012345);
        c.distribution = DistConfig {
            kind: DistKind::Uniform,
            m: None,
            half_width: Some(2.0),
        };
        c.out = Some(PathBuf::from("out.csv"));
        c.workers = Some(3);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = RunConfig::default().to_toml().unwrap();
        text = text.replace("[params]\n", "[params]\nbeta = 2.0\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
        let top = format!("colour = \"red\"\n{}", RunConfig::default().to_toml().unwrap());
        assert!(RunConfig::from_toml(&top).is_err());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let mut c = RunConfig::default();
        c.grid = GridConfig {
            f_min: -1.0,
            f_max: 2.0,
            f_count: 41,
        };
        let fs = c.f_grid();
        assert_eq!(fs.len(), 41);
        assert_eq!(fs[0], -1.0);
        assert_eq!(fs[40], 2.0);
        c.grid.f_count = 1;
        assert_eq!(c.f_grid(), vec![-1.0]);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let mut file_cfg = RunConfig::default();
        file_cfg.params.gamma = 3.0;
        file_cfg.t = vec![0.2];
        fs::write(&path, file_cfg.to_toml().unwrap()).unwrap();
        let o = Overrides {
            config: Some(path),
            t: Some(vec![0.4, 0.8]),
            m: Some(2.0),
            ..Overrides::default()
        };
        let c = o.resolve(Command::Series).unwrap();
        assert_eq!(c.command, Command::Series);
        assert_eq!(c.params.gamma, 3.0);
        assert_eq!(c.t, vec![0.4, 0.8]);
        assert_eq!(c.distribution.m, Some(2.0));
    }

    #[test]
    fn csv_floats_carry_seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        let mantissa = s.split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn uniform_eval_is_flat_in_f() {
        let mut c = RunConfig::default();
        c.distribution = DistConfig {
            kind: DistKind::Uniform,
            m: None,
            half_width: Some(1.0),
        };
        c.t = vec![0.3, 1.0];
        c.grid.f_count = 7;
        let r = render(Command::Eval, &c).unwrap();
        assert_eq!(r.status, EXIT_OK);
        let rows: Vec<Vec<&str>> = r.csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 14);
        for block in rows.chunks(7) {
            assert!(block.iter().all(|row| row[3] == block[0][3] && row[0] == "closed_form"));
        }
    }

    #[test]
    fn check_ou_reports_coefficient_and_inapplicable_status() {
        let mut c = RunConfig::default();
        c.t = vec![1.0];
        let r = render(Command::CheckOu, &c).unwrap();
        assert_eq!(r.status, EXIT_INAPPLICABLE);
        assert!(r.notes[0].contains("0.125"));
        c.t = vec![0.0];
        assert_eq!(render(Command::CheckOu, &c).unwrap().status, EXIT_OK);
    }

    #[test]
    fn feller_violation_maps_to_inapplicable() {
        let mut c = RunConfig::default();
        c.params.k = 2.0;
        let err = render(Command::Eval, &c).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_INAPPLICABLE);
        c.params.k = -1.0;
        assert_eq!(exit_code(&render(Command::Eval, &c).unwrap_err()), EXIT_INVALID);
    }

    #[test]
    fn series_requires_gaussian_data() {
        let mut c = RunConfig::default();
        c.distribution = DistConfig {
            kind: DistKind::Cauchy,
            m: Some(1.0),
            half_width: None,
        };
        assert!(render(Command::Series, &c).is_err());
    }

    #[test]
    fn series_reports_argmin_row() {
        let mut c = RunConfig::default();
        c.t = vec![0.1];
        c.grid.f_count = 3;
        let r = render(Command::Series, &c).unwrap();
        let last = r.csv.lines().last().unwrap();
        assert!(last.starts_with("series_argmin,"));
        let f: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert!((f - 1.3 / 3.6).abs() < 1e-15);
    }

    #[test]
    fn mc_settings_are_validated_only_for_simulation_commands() {
        let mut c = RunConfig::default();
        c.mc.paths = 10;
        c.grid.f_count = 2;
        assert!(render(Command::Mc, &c).is_err());
        assert!(render(Command::Eval, &c).is_ok());
    }
}

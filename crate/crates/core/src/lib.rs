//! Conditional mean and variance of the Heston instantaneous variance given
//! the observed log-return, by Fourier inversion, small-time series and
//! Monte Carlo regression.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod series;

pub use error::{Error, Result};
pub use estimator::{
    cond_mean, cond_moments, cond_moments_grid, cond_variance, ou_divergence_check, rating_index, CondMomentResult,
    EstimatorOptions, MomentMethod, OuDiagnostic, Rating, Route,
};
pub use kernel::{riccati_kernel, KernelValues};
pub use model::{HestonParams, InitialReturnDistribution};
pub use montecarlo::{conditional_moments, simulate_terminal, Bandwidth, McConfig, McSample};
pub use quadrature::Tolerances;
pub use series::{taylor_argmin, taylor_cond_mean};

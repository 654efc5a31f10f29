//! Limiting Gaussian processes: covariance estimation and sampling.

mod gaussian;
mod ks;
mod longrun;

pub use gaussian::{regularized_cholesky, sample_gaussian_limit, GaussianLimitSample};
pub use ks::ks_distance;
pub use longrun::{
    bartlett_indicator_cov, default_lagmax, iid_indicator_cov, longrun_cov_global,
    longrun_cov_indicator, CovarianceEstimate, LagWindow, GLOBAL_U_POINTS, MIN_PATH_PER_LAG,
};

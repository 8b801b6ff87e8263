//! Seeded Monte Carlo simulation of both MAP families, streaming moments and
//! kernel density estimation. Everything here works in `f64`.

mod kde;
mod moments;
mod paths;
mod rng;

pub use kde::{gaussian_density, kde_density, silverman_bandwidth, Axis, EmpiricalDensity, Grid, MIN_KDE_SAMPLES};
pub use moments::{empirical_covariance, CovarianceEstimate, StreamingMoments, JACKKNIFE_GROUPS};
pub use paths::{
    gaussian_samples, local_time_vectors, simulate_ctmc_local_times, simulate_discrete, PathSample, SampleSet, BLOCK_PATHS,
};
pub use rng::SeedSpec;

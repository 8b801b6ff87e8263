//! Markov additive processes on a finite state space.
//!
//! The crate computes the Fourier-matrix semigroup and asymptotic covariance of
//! a MAP exactly, and checks the central and local limit theorems numerically:
//! deterministic characteristic-function experiments plus Monte Carlo density
//! estimation for the local times of jump processes.
//!
//! The deterministic math ([`markov`], [`model`], [`spectral`]) is generic over
//! [`Real`]; the `*64` aliases below fix it to `f64`, which is what the
//! simulation and the experiment harness use.

pub mod error;
pub mod fit;
pub mod harness;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StochasticMatrix64 = markov::StochasticMatrix<f64>;
pub type Generator64 = markov::Generator<f64>;
pub type ChainSpec64 = markov::ChainSpec<f64>;
pub type CovarianceMatrix64 = markov::CovarianceMatrix<f64>;
pub type IncrementLaw64 = model::IncrementLaw<f64>;
pub type DiscreteMapModel64 = model::DiscreteMapModel<f64>;
pub type LocalTimeMapModel64 = model::LocalTimeMapModel<f64>;
pub type MapModel64 = model::MapModel<f64>;
pub type FourierMatrix64 = spectral::FourierMatrix<f64>;
pub type SpectralDecomposition64 = spectral::SpectralDecomposition<f64>;

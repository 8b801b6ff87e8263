use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("chain is not irreducible (state {unreachable} not reachable from state {from})")]
    NotIrreducible { from: usize, unreachable: usize },
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("matrix is not positive definite (smallest eigenvalue {min}, largest {max})")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("matrix exponential overflow guard: norm {norm} exceeds the scaling budget")]
    ExpOverflow { norm: f64 },
    #[error("discrete-time model needs an integer time, got {0}")]
    NonIntegerTime(f64),
    #[error("vector is not in the hyperplane <y,1> = 0 (sum {0})")]
    NotInHyperplane(f64),
    #[error("no unique dominant eigenvalue: moduli {first} and {second} tie")]
    EigenTie { first: f64, second: f64 },
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("lattice behaviour detected: fitted decay rate {tau} does not fall below 1")]
    LatticeDetected { tau: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("bandwidth {bandwidth} is below a quarter of the grid step {step}")]
    BandwidthTooSmall { bandwidth: f64, step: f64 },
    #[error("degenerate input for rate fit: {0}")]
    DegenerateInput(String),
    #[error("configuration error at {location}: {message}")]
    Config { location: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }
}

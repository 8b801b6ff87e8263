//! Finite-state chain linear algebra: structural checks, stationary laws,
//! transition semigroups, the deviation matrix and the asymptotic covariance
//! of local times.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, expm};
use crate::scalar::Real;

pub const MIN_STATES: usize = 2;
pub const MAX_STATES: usize = 64;

fn check_shape<T: Real>(m: &DMatrix<T>, what: &str) -> Result<usize> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Invalid(format!("{what} must be square, got {}x{}", n, m.ncols())));
    }
    if !(MIN_STATES..=MAX_STATES).contains(&n) {
        return Err(Error::Invalid(format!(
            "{what} must have between {MIN_STATES} and {MAX_STATES} states, got {n}"
        )));
    }
    if let Some(((i, j), _)) = m.iter().enumerate().map(|(idx, x)| ((idx % n, idx / n), x)).find(|(_, x)| !x.is_finite()) {
        return Err(Error::Invalid(format!("{what} entry ({}, {}) is not finite", i + 1, j + 1)));
    }
    Ok(n)
}

/// Row-stochastic transition matrix of a discrete-time chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> StochasticMatrix<T> {
    pub fn new(entries: DMatrix<T>) -> Result<Self> {
        let n = check_shape(&entries, "stochastic matrix")?;
        let tol = T::tol(1e-12);
        for i in 0..n {
            let mut sum = T::zero();
            for j in 0..n {
                let p = entries[(i, j)];
                if p < T::zero() {
                    return Err(Error::Invalid(format!(
                        "stochastic matrix entry ({}, {}) is negative: {}",
                        i + 1,
                        j + 1,
                        p.as_f64()
                    )));
                }
                sum += p;
            }
            if (sum - T::one()).abs() > tol {
                return Err(Error::Invalid(format!(
                    "stochastic matrix row {} sums to {} instead of 1",
                    i + 1,
                    sum.as_f64()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }
}

/// Rate matrix of a continuous-time jump process.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> Generator<T> {
    pub fn new(entries: DMatrix<T>) -> Result<Self> {
        let n = check_shape(&entries, "generator")?;
        let tol = T::tol(1e-12);
        for i in 0..n {
            let mut sum = T::zero();
            let mut scale = T::zero();
            for j in 0..n {
                let g = entries[(i, j)];
                if i != j && g < T::zero() {
                    return Err(Error::Invalid(format!(
                        "generator off-diagonal entry ({}, {}) is negative: {}",
                        i + 1,
                        j + 1,
                        g.as_f64()
                    )));
                }
                sum += g;
                scale = scale.max(g.abs());
            }
            if entries[(i, i)] > T::zero() {
                return Err(Error::Invalid(format!("generator diagonal entry {} is positive", i + 1)));
            }
            if sum.abs() > tol * scale.max(T::one()) {
                return Err(Error::Invalid(format!(
                    "generator row {} sums to {} instead of 0",
                    i + 1,
                    sum.as_f64()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }

    /// Total jump rate out of state `i`.
    pub fn exit_rate(&self, i: usize) -> T {
        -self.entries[(i, i)]
    }

    /// `c * G`, used for time changes.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(&self.entries * c)
    }
}

pub(crate) fn matrix_from_rows<T: Real>(rows: &[Vec<T>]) -> Result<DMatrix<T>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Invalid("matrix has no rows".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Invalid(format!("row {} has {} entries, expected {n}", i + 1, r.len())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// The driving dynamics of a MAP.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSpec<T: Real> {
    Discrete(StochasticMatrix<T>),
    Continuous(Generator<T>),
}

impl<T: Real> ChainSpec<T> {
    pub fn n(&self) -> usize {
        match self {
            ChainSpec::Discrete(p) => p.n(),
            ChainSpec::Continuous(g) => g.n(),
        }
    }

    /// Whether `i -> j` (i ≠ j, or a self-loop for discrete chains) is a transition.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        match self {
            ChainSpec::Discrete(p) => p.get(i, j) > T::zero(),
            ChainSpec::Continuous(g) => i != j && g.get(i, j) > T::zero(),
        }
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducibility().is_ok()
    }

    pub fn irreducibility(&self) -> Result<()> {
        linalg::strongly_connected(self.n(), |i, j| self.has_edge(i, j))
            .map_err(|(from, unreachable)| Error::NotIrreducible { from, unreachable })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution<T: Real> {
    weights: DVector<T>,
}

impl<T: Real> StationaryDistribution<T> {
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    pub fn get(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The rank-one matrix `1ᵀπ` whose rows all equal π.
    pub fn projector(&self) -> DMatrix<T> {
        let n = self.len();
        DMatrix::from_fn(n, n, |_, j| self.weights[j])
    }
}

/// Invariant law of an irreducible chain.
///
/// Solves the augmented system `[Mᵀ; 1ᵀ] π = e_{n+1}` in the least-squares
/// sense, with `M = P - I` or `M = G`.
pub fn stationary<T: Real>(chain: &ChainSpec<T>) -> Result<StationaryDistribution<T>> {
    chain.irreducibility()?;
    let n = chain.n();
    let m = match chain {
        ChainSpec::Discrete(p) => p.entries() - DMatrix::<T>::identity(n, n),
        ChainSpec::Continuous(g) => g.entries().clone(),
    };
    let mut a = DMatrix::<T>::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = m[(i, j)];
        }
        a[(n, i)] = T::one();
    }
    let mut b = DVector::<T>::zeros(n + 1);
    b[n] = T::one();
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, T::default_epsilon())
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    let total = x.sum();
    let weights = x.map(|w| {
        let w = w / total;
        if w < T::zero() && w > -T::tol(1e-13) {
            T::zero()
        } else {
            w
        }
    });
    let residual = (weights.transpose() * &m).iter().fold(T::zero(), |acc, r| acc.max(r.abs()));
    let scale = crate::scalar::max_abs(&m).max(T::one());
    if residual > T::tol(1e-10) * scale || weights.iter().any(|w| *w < T::zero()) {
        return Err(Error::SingularSystem(format!(
            "stationary residual {} too large",
            residual.as_f64()
        )));
    }
    Ok(StationaryDistribution { weights })
}

/// Result of the irreducibility/aperiodicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct IpStatus {
    pub irreducible: bool,
    /// `None` when the chain is reducible and the period is not defined.
    pub aperiodic: Option<bool>,
}

impl IpStatus {
    pub fn holds(&self) -> bool {
        self.irreducible && self.aperiodic == Some(true)
    }
}

pub fn check_ip<T: Real>(p: &StochasticMatrix<T>) -> IpStatus {
    let n = p.n();
    let edge = |i: usize, j: usize| p.get(i, j) > T::zero();
    if linalg::strongly_connected(n, edge).is_err() {
        return IpStatus { irreducible: false, aperiodic: None };
    }
    IpStatus { irreducible: true, aperiodic: Some(linalg::period(n, edge) == 1) }
}

/// Transition matrix `exp(tG)`.
pub fn matrix_exp<T: Real>(g: &Generator<T>, t: T) -> Result<StochasticMatrix<T>> {
    if !t.is_finite() || t < T::zero() {
        return Err(Error::Invalid(format!("time must be finite and nonnegative, got {}", t.as_f64())));
    }
    let mut e = expm(&(g.entries() * t))?;
    let clamp = T::tol(1e-13);
    for x in e.iter_mut() {
        if *x < T::zero() && *x >= -clamp {
            *x = T::zero();
        }
    }
    StochasticMatrix::new(e).map_err(|err| Error::NumericalInstability(format!("exp(tG) lost stochasticity: {err}")))
}

/// `D = ∫₀^∞ (e^{tG} - 1ᵀπ) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> DeviationMatrix<T> {
    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }
}

/// Deviation matrix through the fundamental-matrix identity
/// `D = (1ᵀπ - G)⁻¹ - 1ᵀπ`.
pub fn deviation_matrix<T: Real>(g: &Generator<T>) -> Result<DeviationMatrix<T>> {
    let pi = stationary(&ChainSpec::Continuous(g.clone()))?;
    deviation_with(g, &pi)
}

pub(crate) fn deviation_with<T: Real>(g: &Generator<T>, pi: &StationaryDistribution<T>) -> Result<DeviationMatrix<T>> {
    let proj = pi.projector();
    let inv = (&proj - g.entries())
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("1ᵀπ - G is not invertible".into()))?;
    Ok(DeviationMatrix { entries: inv - proj })
}

/// Fundamental matrix `(I - P + 1ᵀπ)⁻¹` of a discrete chain.
pub fn fundamental_matrix<T: Real>(p: &StochasticMatrix<T>, pi: &StationaryDistribution<T>) -> Result<DMatrix<T>> {
    let n = p.n();
    (DMatrix::<T>::identity(n, n) - p.entries() + pi.projector())
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("I - P + 1ᵀπ is not invertible".into()))
}

/// Symmetric covariance matrix of a limiting Gaussian law.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Symmetrises `entries` after checking they are symmetric and PSD.
    pub fn new(entries: DMatrix<T>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::Invalid("covariance must be a nonempty square matrix".into()));
        }
        let scale = crate::scalar::max_abs(&entries).max(T::one());
        let asym = crate::scalar::max_abs(&(&entries - entries.transpose()));
        if asym > T::tol(1e-10) * scale {
            return Err(Error::Invalid(format!("covariance is not symmetric (defect {})", asym.as_f64())));
        }
        let sym = (&entries + entries.transpose()) * T::lit(0.5);
        let ev = linalg::symmetric_eigenvalues(&sym);
        if ev[0] < -T::tol(1e-10) * scale {
            return Err(Error::NotPositiveDefinite { min: ev[0].as_f64(), max: ev[ev.len() - 1].as_f64() });
        }
        Ok(Self { entries: sym })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::symmetric_eigenvalues(&self.entries)
    }

    /// Positive definite when the smallest eigenvalue exceeds `1e-10` times the largest.
    pub fn require_positive_definite(&self) -> Result<()> {
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if max <= T::zero() || min <= T::lit(1e-10) * max {
            return Err(Error::NotPositiveDefinite { min: min.as_f64(), max: max.as_f64() });
        }
        Ok(())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.require_positive_definite().is_ok()
    }

    pub fn inverse(&self) -> Result<DMatrix<T>> {
        self.require_positive_definite()?;
        self.entries
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::NotPositiveDefinite { min: f64::NAN, max: f64::NAN })
    }

    pub fn determinant(&self) -> T {
        self.entries.determinant()
    }
}

/// Asymptotic covariance of `t^{-1/2} Λ(L_t - tπ)`:
/// `Σ_ij = π_i D_ij + π_j D_ji` for `i, j < n`.
///
/// `D` is the deviation matrix with the positive sign. With the opposite sign
/// the diagonal would be negative; the Monte Carlo variance of the two-state
/// symmetric chain (0.25) confirms this convention.
pub fn local_time_covariance<T: Real>(g: &Generator<T>) -> Result<CovarianceMatrix<T>> {
    let pi = stationary(&ChainSpec::Continuous(g.clone()))?;
    let d = deviation_with(g, &pi)?;
    let k = g.n() - 1;
    let sigma = DMatrix::from_fn(k, k, |i, j| pi.get(i) * d.get(i, j) + pi.get(j) * d.get(j, i));
    let cov = CovarianceMatrix::new(sigma)?;
    cov.require_positive_definite()?;
    Ok(cov)
}

/// Irreducibility of the principal sub-generator with state `i` removed.
///
/// A 1×1 sub-generator counts as irreducible iff its entry is negative.
pub fn subgenerator_irreducible<T: Real>(g: &Generator<T>, i: usize) -> bool {
    let n = g.n();
    assert!(i < n, "state {i} out of range");
    let keep: Vec<usize> = (0..n).filter(|&s| s != i).collect();
    if keep.len() == 1 {
        return g.get(keep[0], keep[0]) < T::zero();
    }
    linalg::strongly_connected(keep.len(), |a, b| a != b && g.get(keep[a], keep[b]) > T::zero()).is_ok()
}

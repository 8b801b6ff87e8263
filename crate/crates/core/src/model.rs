//! The two MAP families: discrete-time Markov random walks with
//! per-transition increment laws, and continuous-time jump processes carrying
//! their vector of local times.

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{
    self, ChainSpec, CovarianceMatrix, Generator, StationaryDistribution, StochasticMatrix,
};
use crate::scalar::{Real, C};

/// Conditional law of the additive increment attached to one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementLaw<T: Real> {
    PointMass { at: Vec<T> },
    Gaussian { mean: Vec<T>, cov: Vec<Vec<T>> },
    UniformBox { lo: Vec<T>, hi: Vec<T> },
    Mixture { weights: Vec<T>, components: Vec<IncrementLaw<T>> },
}

fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

impl<T: Real> IncrementLaw<T> {
    pub fn dim(&self) -> usize {
        match self {
            IncrementLaw::PointMass { at } => at.len(),
            IncrementLaw::Gaussian { mean, .. } => mean.len(),
            IncrementLaw::UniformBox { lo, .. } => lo.len(),
            IncrementLaw::Mixture { components, .. } => components.first().map_or(0, |c| c.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.dim() == 0 {
            return bad("increment law has dimension 0".into());
        }
        match self {
            IncrementLaw::PointMass { at } => {
                if at.iter().any(|x| !x.is_finite()) {
                    return bad("point mass location is not finite".into());
                }
            }
            IncrementLaw::Gaussian { mean, cov } => {
                let d = mean.len();
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return bad(format!("gaussian covariance must be {d}x{d}"));
                }
                let c = self.gaussian_cov().expect("gaussian");
                CovarianceMatrix::new(c).map_err(|e| Error::Invalid(format!("gaussian covariance: {e}")))?;
            }
            IncrementLaw::UniformBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return bad("uniform box bounds differ in length".into());
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return bad("uniform box needs lo < hi componentwise".into());
                }
            }
            IncrementLaw::Mixture { weights, components } => {
                if weights.len() != components.len() || components.is_empty() {
                    return bad("mixture needs one weight per component".into());
                }
                if weights.iter().any(|w| *w < T::zero()) {
                    return bad("mixture weights must be nonnegative".into());
                }
                let total = weights.iter().fold(T::zero(), |a, w| a + *w);
                if (total - T::one()).abs() > T::tol(1e-12) {
                    return bad(format!("mixture weights sum to {}", total.as_f64()));
                }
                let d = components[0].dim();
                for c in components {
                    if c.dim() != d {
                        return bad("mixture components differ in dimension".into());
                    }
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    fn gaussian_cov(&self) -> Option<DMatrix<T>> {
        match self {
            IncrementLaw::Gaussian { cov, .. } => {
                let d = cov.len();
                Some(DMatrix::from_fn(d, d, |i, j| cov[i][j]))
            }
            _ => None,
        }
    }

    /// Characteristic function `E[exp(i⟨ζ, X⟩)]`.
    pub fn cf(&self, zeta: &[T]) -> C<T> {
        match self {
            IncrementLaw::PointMass { at } => C::new(T::zero(), dot(zeta, at)).exp(),
            IncrementLaw::Gaussian { mean, .. } => {
                let c = self.gaussian_cov().expect("gaussian");
                let z = DVector::from_column_slice(zeta);
                let quad = (z.transpose() * &c * &z)[(0, 0)];
                C::new(-quad * T::lit(0.5), dot(zeta, mean)).exp()
            }
            IncrementLaw::UniformBox { lo, hi } => {
                let mut acc = C::new(T::one(), T::zero());
                for ((z, a), b) in zeta.iter().zip(lo).zip(hi) {
                    let centre = (*a + *b) * T::lit(0.5);
                    let half = (*b - *a) * T::lit(0.5);
                    acc *= C::new(T::zero(), *z * centre).exp() * sinc(*z * half);
                }
                acc
            }
            IncrementLaw::Mixture { weights, components } => components
                .iter()
                .zip(weights)
                .fold(C::new(T::zero(), T::zero()), |acc, (c, w)| acc + c.cf(zeta) * *w),
        }
    }

    pub fn mean(&self) -> DVector<T> {
        match self {
            IncrementLaw::PointMass { at } => DVector::from_column_slice(at),
            IncrementLaw::Gaussian { mean, .. } => DVector::from_column_slice(mean),
            IncrementLaw::UniformBox { lo, hi } => {
                DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(a, b)| (*a + *b) * T::lit(0.5)))
            }
            IncrementLaw::Mixture { weights, components } => components
                .iter()
                .zip(weights)
                .fold(DVector::zeros(self.dim()), |acc, (c, w)| acc + c.mean() * *w),
        }
    }

    /// Raw second moment `E[X Xᵀ]`.
    pub fn second_moment(&self) -> DMatrix<T> {
        match self {
            IncrementLaw::PointMass { .. } => {
                let m = self.mean();
                &m * m.transpose()
            }
            IncrementLaw::Gaussian { .. } => {
                let m = self.mean();
                self.gaussian_cov().expect("gaussian") + &m * m.transpose()
            }
            IncrementLaw::UniformBox { lo, hi } => {
                let m = self.mean();
                let mut s = &m * m.transpose();
                for i in 0..lo.len() {
                    let w = hi[i] - lo[i];
                    s[(i, i)] += w * w / T::lit(12.0);
                }
                s
            }
            IncrementLaw::Mixture { weights, components } => {
                let d = self.dim();
                components
                    .iter()
                    .zip(weights)
                    .fold(DMatrix::zeros(d, d), |acc, (c, w)| acc + c.second_moment() * *w)
            }
        }
    }

    pub fn covariance(&self) -> DMatrix<T> {
        let m = self.mean();
        self.second_moment() - &m * m.transpose()
    }

    /// `E‖X‖⁴`, used to bound the third absolute moment in dimension ≥ 2.
    fn fourth_norm_moment(&self) -> T {
        match self {
            IncrementLaw::PointMass { at } => {
                let s = dot(at, at);
                s * s
            }
            IncrementLaw::Gaussian { mean, .. } => {
                let c = self.gaussian_cov().expect("gaussian");
                let m = DVector::from_column_slice(mean);
                let tr = c.trace();
                let mm = m.dot(&m);
                let tr2 = (&c * &c).trace();
                let mcm = (m.transpose() * &c * &m)[(0, 0)];
                (tr + mm) * (tr + mm) + T::lit(2.0) * tr2 + T::lit(4.0) * mcm
            }
            IncrementLaw::UniformBox { lo, hi } => {
                // Independent coordinates: E(ΣX_i²)² = Σ E X_i⁴ + Σ_{i≠j} E X_i² E X_j².
                let raw = |a: T, b: T, p: i32| (b.powi(p + 1) - a.powi(p + 1)) / (T::lit((p + 1) as f64) * (b - a));
                let m2: Vec<T> = lo.iter().zip(hi).map(|(a, b)| raw(*a, *b, 2)).collect();
                let m4: Vec<T> = lo.iter().zip(hi).map(|(a, b)| raw(*a, *b, 4)).collect();
                let sum2 = m2.iter().fold(T::zero(), |a, x| a + *x);
                let mut total = T::zero();
                for i in 0..m2.len() {
                    total += m4[i] + m2[i] * (sum2 - m2[i]);
                }
                total
            }
            IncrementLaw::Mixture { weights, components } => components
                .iter()
                .zip(weights)
                .fold(T::zero(), |acc, (c, w)| acc + c.fourth_norm_moment() * *w),
        }
    }

    /// `E‖X‖^α` for α ∈ {2, 3}. The flag is false when only an upper bound is
    /// available (α = 3 in dimension ≥ 2 for continuous laws, by Cauchy–Schwarz).
    pub fn abs_moment(&self, alpha: u32) -> (T, bool) {
        let second = self.second_moment().trace();
        match alpha {
            2 => (second, true),
            3 => match self {
                IncrementLaw::PointMass { at } => (dot(at, at).sqrt().powi(3), true),
                IncrementLaw::Mixture { weights, components } => {
                    components.iter().zip(weights).fold((T::zero(), true), |(acc, ex), (c, w)| {
                        let (v, e) = c.abs_moment(3);
                        (acc + v * *w, ex && e)
                    })
                }
                _ if self.dim() == 1 => (self.third_abs_1d(), true),
                _ => ((second * self.fourth_norm_moment()).sqrt(), false),
            },
            _ => panic!("abs_moment supports orders 2 and 3, got {alpha}"),
        }
    }

    fn third_abs_1d(&self) -> T {
        match self {
            IncrementLaw::Gaussian { mean, cov } => {
                let (a, s) = (mean[0].as_f64(), cov[0][0].as_f64().sqrt());
                if s == 0.0 {
                    return T::lit(a.abs().powi(3));
                }
                let r = a / s;
                let tail = 1.0 - libm::erfc(r / std::f64::consts::SQRT_2);
                let v = s.powi(3) * (2.0 / std::f64::consts::PI).sqrt() * (2.0 + r * r) * (-0.5 * r * r).exp()
                    + a * (a * a + 3.0 * s * s) * tail;
                T::lit(v)
            }
            IncrementLaw::UniformBox { lo, hi } => {
                let prim = |x: T| x.powi(4) / T::lit(4.0) * x.signum();
                (prim(hi[0]) - prim(lo[0])) / (hi[0] - lo[0])
            }
            _ => unreachable!("handled by abs_moment"),
        }
    }

    /// The same law translated by `shift`.
    pub fn shifted(&self, shift: &[T]) -> Self {
        let add = |v: &[T]| v.iter().zip(shift).map(|(a, b)| *a + *b).collect::<Vec<T>>();
        match self {
            IncrementLaw::PointMass { at } => IncrementLaw::PointMass { at: add(at) },
            IncrementLaw::Gaussian { mean, cov } => IncrementLaw::Gaussian { mean: add(mean), cov: cov.clone() },
            IncrementLaw::UniformBox { lo, hi } => IncrementLaw::UniformBox { lo: add(lo), hi: add(hi) },
            IncrementLaw::Mixture { weights, components } => IncrementLaw::Mixture {
                weights: weights.clone(),
                components: components.iter().map(|c| c.shifted(shift)).collect(),
            },
        }
    }

    /// Converts the parameters to another precision.
    pub fn cast<U: Real>(&self) -> IncrementLaw<U> {
        let v = |x: &[T]| x.iter().map(|a| U::lit(a.as_f64())).collect::<Vec<U>>();
        match self {
            IncrementLaw::PointMass { at } => IncrementLaw::PointMass { at: v(at) },
            IncrementLaw::Gaussian { mean, cov } => IncrementLaw::Gaussian {
                mean: v(mean),
                cov: cov.iter().map(|r| v(r)).collect(),
            },
            IncrementLaw::UniformBox { lo, hi } => IncrementLaw::UniformBox { lo: v(lo), hi: v(hi) },
            IncrementLaw::Mixture { weights, components } => IncrementLaw::Mixture {
                weights: v(weights),
                components: components.iter().map(|c| c.cast()).collect(),
            },
        }
    }
}

/// Markov random walk: a stochastic matrix plus one increment law per
/// positive transition.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMapModel<T: Real> {
    p: StochasticMatrix<T>,
    /// Row-major n×n table; `None` exactly where `P_kℓ = 0`.
    laws: Vec<Option<IncrementLaw<T>>>,
    d: usize,
    pi: StationaryDistribution<T>,
}

impl<T: Real> DiscreteMapModel<T> {
    pub fn new(p: StochasticMatrix<T>, laws: Vec<Vec<Option<IncrementLaw<T>>>>) -> Result<Self> {
        let n = p.n();
        if laws.len() != n || laws.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!("increment-law table must be {n}x{n}")));
        }
        let mut d = None;
        for (k, row) in laws.iter().enumerate() {
            for (l, law) in row.iter().enumerate() {
                let positive = p.get(k, l) > T::zero();
                match (positive, law) {
                    (true, None) => {
                        return Err(Error::Invalid(format!(
                            "transition ({}, {}) has positive probability but no increment law",
                            k + 1,
                            l + 1
                        )))
                    }
                    (false, Some(_)) => {
                        return Err(Error::Invalid(format!(
                            "transition ({}, {}) has zero probability but carries an increment law",
                            k + 1,
                            l + 1
                        )))
                    }
                    (true, Some(law)) => {
                        law.validate()
                            .map_err(|e| Error::Invalid(format!("increment law ({}, {}): {e}", k + 1, l + 1)))?;
                        match d {
                            None => d = Some(law.dim()),
                            Some(d0) if d0 != law.dim() => {
                                return Err(Error::Invalid(format!(
                                    "increment law ({}, {}) has dimension {} but others have {d0}",
                                    k + 1,
                                    l + 1,
                                    law.dim()
                                )))
                            }
                            _ => {}
                        }
                    }
                    (false, None) => {}
                }
            }
        }
        let pi = markov::stationary(&ChainSpec::Discrete(p.clone()))?;
        Ok(Self {
            p,
            laws: laws.into_iter().flatten().collect(),
            d: d.expect("irreducible chain has a positive transition"),
            pi,
        })
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn transition(&self) -> &StochasticMatrix<T> {
        &self.p
    }

    pub fn stationary(&self) -> &StationaryDistribution<T> {
        &self.pi
    }

    pub fn law(&self, k: usize, l: usize) -> Option<&IncrementLaw<T>> {
        self.laws[k * self.n() + l].as_ref()
    }

    /// Conditional mean increment out of each state, `h(k) = Σ_ℓ P_kℓ E[ξ_kℓ]`.
    fn state_means(&self) -> Vec<DVector<T>> {
        (0..self.n())
            .map(|k| {
                (0..self.n()).fold(DVector::zeros(self.d), |acc, l| match self.law(k, l) {
                    Some(law) => acc + law.mean() * self.p.get(k, l),
                    None => acc,
                })
            })
            .collect()
    }

    /// `m = E_π[Z₁]`.
    pub fn drift(&self) -> DVector<T> {
        self.state_means()
            .iter()
            .enumerate()
            .fold(DVector::zeros(self.d), |acc, (k, h)| acc + h * self.pi.get(k))
    }

    /// Shifts every increment law by `-m` so that `E_π[Y₁] = 0`.
    ///
    /// Returns an identical copy when the drift is already below `1e-12`.
    pub fn center(&self) -> Self {
        let m = self.drift();
        if m.iter().all(|x| x.abs() <= T::tol(1e-12)) {
            return self.clone();
        }
        let shift: Vec<T> = m.iter().map(|x| -*x).collect();
        Self {
            laws: self.laws.iter().map(|l| l.as_ref().map(|law| law.shifted(&shift))).collect(),
            ..self.clone()
        }
    }

    /// Exact asymptotic covariance of `n^{-1/2} Y_n`:
    /// `Σ = Σ_kℓ π_k P_kℓ E[ξξᵀ] + A + Aᵀ` with
    /// `A = Σ_kℓ π_k P_kℓ E[ξ_kℓ] (Z h)(ℓ)ᵀ` and `Z` the fundamental matrix.
    pub fn asymptotic_covariance(&self) -> Result<CovarianceMatrix<T>> {
        let centred = self.center();
        let n = self.n();
        let d = self.d;
        let z = markov::fundamental_matrix(&self.p, &self.pi)?;
        let h = centred.state_means();
        let zh: Vec<DVector<T>> = (0..n)
            .map(|l| (0..n).fold(DVector::zeros(d), |acc, j| acc + &h[j] * z[(l, j)]))
            .collect();
        let mut sigma = DMatrix::<T>::zeros(d, d);
        let mut cross = DMatrix::<T>::zeros(d, d);
        for k in 0..n {
            for l in 0..n {
                if let Some(law) = centred.law(k, l) {
                    let w = self.pi.get(k) * self.p.get(k, l);
                    sigma += law.second_moment() * w;
                    cross += law.mean() * zh[l].transpose() * w;
                }
            }
        }
        sigma += &cross + cross.transpose();
        CovarianceMatrix::new(sigma)
    }

    pub fn cast<U: Real>(&self) -> Result<DiscreteMapModel<U>> {
        let n = self.n();
        let p = StochasticMatrix::new(self.p.entries().map(|x| U::lit(x.as_f64())))?;
        let laws = (0..n)
            .map(|k| (0..n).map(|l| self.law(k, l).map(|law| law.cast())).collect())
            .collect();
        DiscreteMapModel::new(p, laws)
    }
}

/// Jump process together with its vector of local times; the drift is π.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeMapModel<T: Real> {
    g: Generator<T>,
    pi: StationaryDistribution<T>,
}

impl<T: Real> LocalTimeMapModel<T> {
    pub fn new(g: Generator<T>) -> Result<Self> {
        let pi = markov::stationary(&ChainSpec::Continuous(g.clone()))?;
        Ok(Self { g, pi })
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn projected_dim(&self) -> usize {
        self.n() - 1
    }

    /// `m = E_π[L₁] = π`.
    pub fn drift(&self) -> DVector<T> {
        self.pi.weights().clone()
    }

    pub fn stationary(&self) -> &StationaryDistribution<T> {
        &self.pi
    }

    pub fn region(&self, t: T) -> Result<RegionDt<T>> {
        region_dt(self, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapModel<T: Real> {
    Discrete(DiscreteMapModel<T>),
    LocalTime(LocalTimeMapModel<T>),
}

impl<T: Real> MapModel<T> {
    /// Dimension of the (projected) additive component.
    pub fn dim(&self) -> usize {
        match self {
            MapModel::Discrete(m) => m.dim(),
            MapModel::LocalTime(m) => m.projected_dim(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            MapModel::Discrete(m) => m.n(),
            MapModel::LocalTime(m) => m.n(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, MapModel::Discrete(_))
    }

    pub fn chain(&self) -> ChainSpec<T> {
        match self {
            MapModel::Discrete(m) => ChainSpec::Discrete(m.transition().clone()),
            MapModel::LocalTime(m) => ChainSpec::Continuous(m.generator().clone()),
        }
    }

    pub fn stationary(&self) -> &StationaryDistribution<T> {
        match self {
            MapModel::Discrete(m) => m.stationary(),
            MapModel::LocalTime(m) => m.stationary(),
        }
    }

    /// Transition matrix of the driving chain over time `t`.
    pub fn transition(&self, t: T) -> Result<DMatrix<T>> {
        match self {
            MapModel::Discrete(m) => {
                let steps = integer_time(t)?;
                Ok(crate::linalg::matrix_power(m.transition().entries(), steps))
            }
            MapModel::LocalTime(m) => Ok(markov::matrix_exp(m.generator(), t)?.entries().clone()),
        }
    }

    pub fn center(&self) -> Self {
        match self {
            MapModel::Discrete(m) => MapModel::Discrete(m.center()),
            MapModel::LocalTime(_) => self.clone(),
        }
    }

    /// Exact asymptotic covariance: fundamental-matrix formula for discrete
    /// models, deviation-matrix formula for local times.
    pub fn exact_covariance(&self) -> Result<CovarianceMatrix<T>> {
        match self {
            MapModel::Discrete(m) => m.asymptotic_covariance(),
            MapModel::LocalTime(m) => markov::local_time_covariance(m.generator()),
        }
    }
}

pub(crate) fn integer_time<T: Real>(t: T) -> Result<u64> {
    let f = t.as_f64();
    if !(f >= 0.0) || f.fract() != 0.0 || !f.is_finite() {
        return Err(Error::NonIntegerTime(f));
    }
    Ok(f as u64)
}

/// Drift `m`: exact from π, P and the law means, or π for local times.
pub fn stationary_mean<T: Real>(model: &MapModel<T>) -> DVector<T> {
    match model {
        MapModel::Discrete(m) => m.drift(),
        MapModel::LocalTime(m) => m.drift(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBound {
    pub order: u32,
    pub value: f64,
    /// True when `value` is the exact moment rather than an upper bound.
    pub exact: bool,
}

/// `max_k sup_{v ≤ 1} E_k‖Y_v‖^α` for α ∈ {2, 3}.
///
/// Discrete models only have `v = 1`. For local times `‖L_v - vπ‖ ≤ v√n`, so
/// `n^{α/2}` is returned as a bound.
pub fn moment_bound<T: Real>(model: &MapModel<T>, alpha: u32) -> MomentBound {
    assert!(alpha == 2 || alpha == 3, "moment order must be 2 or 3");
    match model {
        MapModel::Discrete(m) => {
            let mut best = 0.0f64;
            let mut exact = true;
            for k in 0..m.n() {
                let mut acc = 0.0;
                for l in 0..m.n() {
                    if let Some(law) = m.law(k, l) {
                        let (v, e) = law.abs_moment(alpha);
                        acc += m.transition().get(k, l).as_f64() * v.as_f64();
                        exact &= e;
                    }
                }
                best = best.max(acc);
            }
            MomentBound { order: alpha, value: best, exact }
        }
        MapModel::LocalTime(m) => MomentBound {
            order: alpha,
            value: (m.n() as f64).powf(alpha as f64 / 2.0),
            exact: false,
        },
    }
}

/// Λ: drops the last coordinate of a vector of the hyperplane `⟨y, 1⟩ = 0`.
pub fn project_local_times<T: Real>(y: &[T]) -> Result<Vec<T>> {
    let sum = y.iter().fold(T::zero(), |a, x| a + *x);
    if sum.abs() > T::lit(1e-9) {
        return Err(Error::NotInHyperplane(sum.as_f64()));
    }
    Ok(y[..y.len() - 1].to_vec())
}

/// Λ⁻¹: appends `y_n = -Σ_j y'_j`.
pub fn lift<T: Real>(y: &[T]) -> Vec<T> {
    let sum = y.iter().fold(T::zero(), |a, x| a + *x);
    let mut out = y.to_vec();
    out.push(-sum);
    out
}

/// Open polytope supporting the projected centred local times at time `t`:
/// `y'_j ∈ (-m_j t, (1 - m_j) t)` and `⟨y', 1⟩ < m_n t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDt<T: Real> {
    pub slabs: Vec<(T, T)>,
    pub halfspace: T,
}

/// A face `⟨normal, y⟩ < offset` of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Face<T: Real> {
    pub normal: Vec<T>,
    pub offset: T,
}

impl<T: Real> RegionDt<T> {
    pub fn contains(&self, y: &[T]) -> bool {
        let inside = self.slabs.iter().zip(y).all(|((lo, hi), v)| *lo < *v && *v < *hi);
        inside && y.iter().fold(T::zero(), |a, v| a + *v) < self.halfspace
    }

    pub fn faces(&self) -> Vec<Face<T>> {
        let k = self.slabs.len();
        let unit = |j: usize, s: T| (0..k).map(|i| if i == j { s } else { T::zero() }).collect::<Vec<T>>();
        let mut faces = Vec::with_capacity(2 * k + 1);
        for (j, (lo, hi)) in self.slabs.iter().enumerate() {
            faces.push(Face { normal: unit(j, -T::one()), offset: -*lo });
            faces.push(Face { normal: unit(j, T::one()), offset: *hi });
        }
        faces.push(Face { normal: vec![T::one(); k], offset: self.halfspace });
        faces
    }

    /// The region scaled by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            slabs: self.slabs.iter().map(|(a, b)| (*a * c, *b * c)).collect(),
            halfspace: self.halfspace * c,
        }
    }
}

pub fn region_dt<T: Real>(model: &LocalTimeMapModel<T>, t: T) -> Result<RegionDt<T>> {
    if !(t > T::zero()) {
        return Err(Error::Invalid(format!("region needs t > 0, got {}", t.as_f64())));
    }
    let m = model.drift();
    let k = model.projected_dim();
    Ok(RegionDt {
        slabs: (0..k).map(|j| (-m[j] * t, (T::one() - m[j]) * t)).collect(),
        halfspace: m[k] * t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> StochasticMatrix<f64> {
        StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn by_destination(a: IncrementLaw<f64>, b: IncrementLaw<f64>) -> DiscreteMapModel<f64> {
        DiscreteMapModel::new(
            uniform2(),
            vec![vec![Some(a.clone()), Some(b.clone())], vec![Some(a), Some(b)]],
        )
        .unwrap()
    }

    fn gauss(mu: f64, var: f64) -> IncrementLaw<f64> {
        IncrementLaw::Gaussian { mean: vec![mu], cov: vec![vec![var]] }
    }

    #[test]
    fn centering_point_masses() {
        let m = by_destination(IncrementLaw::PointMass { at: vec![0.0] }, IncrementLaw::PointMass { at: vec![2.0] });
        assert!((m.drift()[0] - 1.0).abs() < 1e-15);
        let c = m.center();
        assert_eq!(c.law(0, 0), Some(&IncrementLaw::PointMass { at: vec![-1.0] }));
        assert_eq!(c.law(1, 1), Some(&IncrementLaw::PointMass { at: vec![1.0] }));
        assert!(c.drift()[0].abs() < 1e-12);
        assert_eq!(c.center(), c);
        let pm = MapModel::Discrete(c);
        let mb = moment_bound(&pm, 3);
        assert!((mb.value - 1.0).abs() < 1e-15 && mb.exact);
    }

    #[test]
    fn centering_only_moves_means() {
        let m = by_destination(gauss(0.0, 1.0), gauss(3.0, 2.0));
        let c = m.center();
        match c.law(0, 1).unwrap() {
            IncrementLaw::Gaussian { mean, cov } => {
                assert!((mean[0] - 1.5).abs() < 1e-15);
                assert_eq!(cov, &vec![vec![2.0]]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn mixture_drift_is_linear_in_weights() {
        let mix = |w: f64| IncrementLaw::Mixture {
            weights: vec![w, 1.0 - w],
            components: vec![IncrementLaw::PointMass { at: vec![1.0] }, gauss(-3.0, 1.0)],
        };
        let drift = |w: f64| by_destination(mix(w), mix(w)).drift()[0];
        let (a, b, c) = (drift(0.0), drift(1.0), drift(0.3));
        assert!((c - (0.3 * b + 0.7 * a)).abs() < 1e-14);
    }

    #[test]
    fn cf_at_zero_is_one() {
        let laws = [
            IncrementLaw::PointMass { at: vec![1.0, -2.0] },
            IncrementLaw::Gaussian { mean: vec![0.3, 1.0], cov: vec![vec![1.0, 0.2], vec![0.2, 0.5]] },
            IncrementLaw::UniformBox { lo: vec![-1.0, 0.0], hi: vec![2.0, 0.5] },
        ];
        for l in &laws {
            assert_eq!(l.cf(&[0.0, 0.0]), C::new(1.0, 0.0));
        }
    }

    #[test]
    fn uniform_cf_and_moments() {
        let u = IncrementLaw::UniformBox { lo: vec![-1.0], hi: vec![3.0] };
        let z = 0.7f64;
        let direct = (C::new(0.0, 3.0 * z).exp() - C::new(0.0, -z).exp()) / C::new(0.0, 4.0 * z);
        assert!((u.cf(&[z]) - direct).norm() < 1e-15);
        // ∫_{-1}^{3} |x|³ dx / 4 = (1/4 + 81/4) / 4
        assert!((u.abs_moment(3).0 - 82.0 / 16.0).abs() < 1e-14);
        assert!((u.covariance()[(0, 0)] - 16.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_abs_moments() {
        let g = gauss(0.0, 1.0);
        assert_eq!(g.abs_moment(2).0, 1.0);
        assert!((g.abs_moment(3).0 - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        // Shifted Gaussian by midpoint quadrature.
        let g = gauss(0.7, 0.49);
        let h = 1e-4;
        let mut q = 0.0;
        let mut x: f64 = -8.0;
        while x < 9.0 {
            let y = x + h / 2.0;
            q += y.abs().powi(3) * (-(y - 0.7f64).powi(2) / (2.0 * 0.49)).exp() / (2.0 * std::f64::consts::PI * 0.49).sqrt() * h;
            x += h;
        }
        assert!((g.abs_moment(3).0 - q).abs() < 1e-7);
    }

    #[test]
    fn discrete_covariance_iid_equivalent() {
        let m = by_destination(gauss(-1.0, 1.0), gauss(1.0, 1.0));
        let s = m.asymptotic_covariance().unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laws_must_match_support() {
        let p = StochasticMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let pm = || Some(IncrementLaw::PointMass { at: vec![0.0] });
        assert!(DiscreteMapModel::new(p.clone(), vec![vec![pm(), pm()], vec![pm(), pm()]]).is_err());
        let p = uniform2();
        assert!(DiscreteMapModel::new(p, vec![vec![pm(), None], vec![pm(), pm()]]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_local_times(&[0.3, -0.3]).unwrap(), vec![0.3]);
        assert_eq!(project_local_times(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(lift(&[1.0, 2.0]), vec![1.0, 2.0, -3.0]);
        assert!(matches!(project_local_times(&[1.0, 0.0]), Err(Error::NotInHyperplane(_))));
    }

    #[test]
    fn region_examples() {
        let g = Generator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let m = LocalTimeMapModel::new(g).unwrap();
        let r = m.region(4.0).unwrap();
        assert_eq!(r.slabs, vec![(-2.0, 2.0)]);
        assert_eq!(r.halfspace, 2.0);
        assert!(r.contains(&[0.0]));
        assert!(!r.contains(&[2.0]));
        assert!(!r.contains(&[-2.0]));
        for t in [0.01, 1.0, 1e3] {
            assert!(m.region(t).unwrap().contains(&[0.0]));
        }
        let lt = MapModel::LocalTime(m);
        assert!(moment_bound(&lt, 3).value <= 2f64.powf(1.5));
        assert_eq!(stationary_mean(&lt).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn local_time_three_state_region() {
        let g = Generator::from_rows(&[vec![-2.0, 1.0, 1.0], vec![1.0, -2.0, 1.0], vec![2.0, 2.0, -4.0]]).unwrap();
        let m = LocalTimeMapModel::new(g).unwrap();
        let r = m.region(10.0).unwrap();
        assert_eq!(r.faces().len(), 5);
        assert!(r.contains(&[0.0, 0.0]));
    }
}

//! Fourier matrices `Ŷ_t(ζ)_{kℓ} = E_k[1{X_t = ℓ} e^{i⟨ζ, Y_t⟩}]` and their
//! dominant spectral data.
//!
//! Discrete models use `Ŷ₁(ζ)_{kℓ} = P_kℓ · cf_kℓ(ζ)` and `Ŷ_n = Ŷ₁ⁿ`.
//! Local-time models use the Feynman–Kac form
//! `Ŷ_t(ζ) = e^{-it⟨ζ, m⟩} exp(t(G + i·diag(ζ, 0)))`, with ζ in projected
//! coordinates padded by a zero for the dropped state.

use nalgebra::{ComplexField, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::ols;
use crate::linalg::{expm, matrix_power};
use crate::markov::CovarianceMatrix;
use crate::model::{integer_time, MapModel};
use crate::scalar::{norm0, to_complex, Real, C};

#[derive(Debug, Clone, PartialEq)]
pub struct FourierMatrix<T: Real> {
    pub entries: DMatrix<C<T>>,
    pub t: T,
    pub zeta: Vec<T>,
}

impl<T: Real> FourierMatrix<T> {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

fn check_zeta<T: Real>(model: &MapModel<T>, zeta: &[T]) -> Result<()> {
    if zeta.len() != model.dim() {
        return Err(Error::Invalid(format!(
            "frequency has dimension {}, model has {}",
            zeta.len(),
            model.dim()
        )));
    }
    if zeta.iter().any(|z| !z.is_finite()) {
        return Err(Error::Invalid("frequency is not finite".into()));
    }
    Ok(())
}

fn unit_step<T: Real>(model: &MapModel<T>, zeta: &[T]) -> DMatrix<C<T>> {
    match model {
        MapModel::Discrete(m) => {
            let n = m.n();
            DMatrix::from_fn(n, n, |k, l| match m.law(k, l) {
                Some(law) => law.cf(zeta) * m.transition().get(k, l),
                None => C::new(T::zero(), T::zero()),
            })
        }
        MapModel::LocalTime(_) => unreachable!("local-time models are handled by the exponential"),
    }
}

/// `Ŷ_t(ζ)`. Discrete models need integer `t`.
pub fn fourier_matrix<T: Real>(model: &MapModel<T>, t: T, zeta: &[T]) -> Result<FourierMatrix<T>> {
    check_zeta(model, zeta)?;
    let entries = match model {
        MapModel::Discrete(_) => {
            let steps = integer_time(t)?;
            matrix_power(&unit_step(model, zeta), steps)
        }
        MapModel::LocalTime(m) => {
            if !(t >= T::zero()) || !t.is_finite() {
                return Err(Error::Invalid(format!("time must be finite and nonnegative, got {}", t.as_f64())));
            }
            let n = m.n();
            let mut a = to_complex(m.generator().entries());
            let mut phase = T::zero();
            let drift = m.drift();
            for (j, z) in zeta.iter().enumerate() {
                a[(j, j)].im += *z;
                phase += *z * drift[j];
            }
            let e = expm(&(a * C::new(t, T::zero())))?;
            debug_assert_eq!(e.nrows(), n);
            e * C::new(T::zero(), -t * phase).exp()
        }
    };
    Ok(FourierMatrix { entries, t, zeta: zeta.to_vec() })
}

/// `‖Ŷ_{t+s}(ζ) - Ŷ_t(ζ) Ŷ_s(ζ)‖₀`.
pub fn semigroup_residual<T: Real>(model: &MapModel<T>, t: T, s: T, zeta: &[T]) -> Result<T> {
    let a = fourier_matrix(model, t, zeta)?;
    let b = fourier_matrix(model, s, zeta)?;
    let ab = fourier_matrix(model, t + s, zeta)?;
    Ok(norm0(&(ab.entries - a.entries * b.entries)))
}

/// `φ_{k,t}(ζ) = e_k Ŷ_t(ζ) 1ᵀ`.
pub fn characteristic_function<T: Real>(model: &MapModel<T>, k: usize, t: T, zeta: &[T]) -> Result<C<T>> {
    if k >= model.n() {
        return Err(Error::Invalid(format!("start state {} out of range", k + 1)));
    }
    let f = fourier_matrix(model, t, zeta)?;
    Ok(f.entries.row(k).iter().fold(C::new(T::zero(), T::zero()), |acc, z| acc + *z))
}

/// Dominant eigen-data of a Fourier matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T: Real> {
    pub lambda: C<T>,
    /// Left eigenvector `u` with `u·v = 1` (bilinear, no conjugation).
    pub left: DVector<C<T>>,
    pub right: DVector<C<T>>,
    /// Rank-one eigenprojection `v uᵀ`.
    pub projection: DMatrix<C<T>>,
    pub second_modulus: T,
    /// `1 - |λ₂| / |λ|`.
    pub gap: T,
    /// `‖Ŷ - λΠ‖₀`.
    pub remainder_norm: T,
}

/// All eigenvalues, sorted by decreasing modulus (ties toward larger real part).
pub fn eigenvalues<T: Real>(m: &DMatrix<C<T>>) -> Result<Vec<C<T>>> {
    let schur = m
        .clone()
        .try_schur(T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::NumericalInstability("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::NumericalInstability("Schur form is not triangular".into()))?;
    let mut ev: Vec<C<T>> = ev.iter().copied().collect();
    ev.sort_by(|a, b| {
        b.modulus()
            .partial_cmp(&a.modulus())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(ev)
}

pub fn spectral_radius<T: Real>(m: &DMatrix<C<T>>) -> Result<T> {
    Ok(eigenvalues(m)?[0].modulus())
}

fn inverse_iteration<T: Real>(m: &DMatrix<C<T>>, lambda: C<T>) -> Result<DVector<C<T>>> {
    let n = m.nrows();
    let shift_size = T::default_epsilon().sqrt() * lambda.modulus().max(T::lit(1e-3));
    let shift = lambda + C::new(shift_size, shift_size);
    let lu = (m - DMatrix::<C<T>>::identity(n, n) * shift).lu();
    let mut x = DVector::from_fn(n, |i, _| C::new(T::one() + T::lit(0.1) * T::lit(i as f64 / n as f64), T::zero()));
    for _ in 0..3 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::NumericalInstability("inverse iteration hit an exactly singular system".into()))?;
        let norm = x.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::NumericalInstability("inverse iteration diverged".into()));
        }
        x.unscale_mut(norm);
    }
    Ok(x)
}

pub fn dominant_eigen<T: Real>(f: &FourierMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let m = &f.entries;
    let n = m.nrows();
    let ev = eigenvalues(m)?;
    let lambda = ev[0];
    let second = if n > 1 { ev[1].modulus() } else { T::zero() };
    if (lambda.modulus() - second).abs() < T::tol(1e-12) {
        return Err(Error::EigenTie { first: lambda.modulus().as_f64(), second: second.as_f64() });
    }
    let mut right = inverse_iteration(m, lambda)?;
    let left = inverse_iteration(&m.transpose(), lambda)?;
    // Scale the right vector to average 1 so that it equals 1 at ζ = 0.
    let sum = right.iter().fold(C::new(T::zero(), T::zero()), |a, z| a + *z);
    if sum.modulus() > T::tol(1e-8) {
        right *= C::new(T::lit(n as f64), T::zero()) / sum;
    }
    let pairing = left.dot(&right);
    if pairing.modulus() < T::tol(1e-12) {
        return Err(Error::NumericalInstability("left and right eigenvectors are orthogonal".into()));
    }
    let left = left / pairing;
    let projection = &right * left.transpose();
    let residual = (m * &right - &right * lambda).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    let scale = norm0(m).max(T::one()) * right.iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    if residual > T::tol(1e-10) * scale {
        return Err(Error::NumericalInstability(format!(
            "eigenvector residual {} too large",
            residual.as_f64()
        )));
    }
    let remainder_norm = norm0(&(m - &projection * lambda));
    Ok(SpectralDecomposition {
        lambda,
        left,
        right,
        projection,
        second_modulus: second,
        gap: T::one() - second / lambda.modulus(),
        remainder_norm,
    })
}

/// Dominant eigenvalue `λ(ζ)` of `Ŷ₁(ζ)`.
pub fn dominant_eigenvalue<T: Real>(model: &MapModel<T>, zeta: &[T]) -> Result<C<T>> {
    Ok(dominant_eigen(&fourier_matrix(model, T::one(), zeta)?)?.lambda)
}

const HESSIAN_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

fn hessian_log_modulus<T: Real>(model: &MapModel<T>, h: T) -> Result<DMatrix<T>> {
    let d = model.dim();
    let f = |z: &[T]| -> Result<T> { Ok(dominant_eigenvalue(model, z)?.modulus().ln()) };
    let f0 = f(&vec![T::zero(); d])?;
    let mut hess = DMatrix::<T>::zeros(d, d);
    let at = |pairs: &[(usize, T)]| {
        let mut z = vec![T::zero(); d];
        for (i, v) in pairs {
            z[*i] += *v;
        }
        z
    };
    for i in 0..d {
        let fp = f(&at(&[(i, h)]))?;
        let fm = f(&at(&[(i, -h)]))?;
        hess[(i, i)] = (fp - f0 * T::lit(2.0) + fm) / (h * h);
        for j in 0..i {
            let fpp = f(&at(&[(i, h), (j, h)]))?;
            let fpm = f(&at(&[(i, h), (j, -h)]))?;
            let fmp = f(&at(&[(i, -h), (j, h)]))?;
            let fmm = f(&at(&[(i, -h), (j, -h)]))?;
            let v = (fpp - fpm - fmp + fmm) / (h * h * T::lit(4.0));
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// `Σ = -∇² log|λ(ζ)|` at `ζ = 0`, by central differences with one Richardson
/// extrapolation step. `log|λ|` is the real part of `log λ`, so no branch
/// choice is involved.
pub fn spectral_covariance<T: Real>(model: &MapModel<T>) -> Result<CovarianceMatrix<T>> {
    let eps_ratio = (T::default_epsilon().as_f64() / f64::EPSILON).powf(0.25).max(1.0);
    let hs: Vec<T> = HESSIAN_STEPS.iter().map(|h| T::lit(h * eps_ratio)).collect();
    let raw: Vec<DMatrix<T>> = hs.iter().map(|h| hessian_log_modulus(model, *h)).collect::<Result<_>>()?;
    let richardson = |coarse: &DMatrix<T>, fine: &DMatrix<T>| (fine * T::lit(4.0) - coarse) / T::lit(3.0);
    let r1 = richardson(&raw[0], &raw[1]);
    let r2 = richardson(&raw[1], &raw[2]);
    let scale = crate::scalar::max_abs(&r2).max(T::lit(1e-2));
    let disagreement = crate::scalar::max_abs(&(&r1 - &r2));
    let tol = T::tol(1e-5).max(T::default_epsilon().sqrt());
    if disagreement > tol * scale {
        return Err(Error::NumericalInstability(format!(
            "Richardson estimates of the Hessian disagree by {}",
            disagreement.as_f64()
        )));
    }
    CovarianceMatrix::new(-r2)
}

/// Grid points `step·ℤ^d` with `lo ≤ ‖ζ‖ ≤ hi`, in lexicographic order.
pub fn grid_points(dim: usize, step: f64, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let m = (hi / step).floor() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-m; dim];
    loop {
        let z: Vec<f64> = idx.iter().map(|i| *i as f64 * step).collect();
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= lo - 1e-12 && r <= hi + 1e-12 {
            out.push(z);
        }
        let mut pos = 0;
        loop {
            if pos == dim {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] > m {
                idx[pos] = -m;
                pos += 1;
            } else {
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LatticeScan {
    pub is_lattice_suspected: bool,
    pub witnesses: Vec<Vec<f64>>,
    /// Largest spectral radius of `Ŷ₁(ζ)` over the scanned points.
    pub max_radius: f64,
    pub points_scanned: usize,
}

pub const LATTICE_THRESHOLD: f64 = 1.0 - 1e-6;

/// Scans `ζ ∈ step·ℤ^d` with `step/2 ≤ ‖ζ‖ ≤ radius` for spectral radius of
/// `Ŷ₁(ζ)` above `1 - 1e-6`.
pub fn lattice_scan<T: Real>(model: &MapModel<T>, radius: f64, grid_step: f64) -> Result<LatticeScan> {
    if !(grid_step > 0.0) || !(radius > grid_step) {
        return Err(Error::Invalid(format!(
            "lattice scan needs 0 < step < radius, got step {grid_step}, radius {radius}"
        )));
    }
    let pts = grid_points(model.dim(), grid_step, grid_step / 2.0, radius);
    let radii: Vec<f64> = pts
        .par_iter()
        .map(|z| {
            let zt: Vec<T> = z.iter().map(|v| T::lit(*v)).collect();
            let f = fourier_matrix(model, T::one(), &zt)?;
            Ok(spectral_radius(&f.entries)?.as_f64())
        })
        .collect::<Result<_>>()?;
    let witnesses: Vec<Vec<f64>> =
        pts.iter().zip(&radii).filter(|(_, r)| **r > LATTICE_THRESHOLD).map(|(z, _)| z.clone()).collect();
    Ok(LatticeScan {
        is_lattice_suspected: !witnesses.is_empty(),
        witnesses,
        max_radius: radii.iter().copied().fold(0.0, f64::max),
        points_scanned: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AnnulusDecay {
    pub tau_hat: f64,
    pub r_squared: f64,
    pub t_grid: Vec<f64>,
    /// `s(t) = max_{δ ≤ ‖ζ‖ ≤ A} |φ_{k,t}(ζ)|` over the grid.
    pub sup_values: Vec<f64>,
}

/// Geometric decay of `|φ_{k,t}|` on the annulus `δ ≤ ‖ζ‖ ≤ A`; fits
/// `log s(t)` linearly in `t` and reports `τ̂ = e^{slope}`.
///
/// The grid maximum is a lower bound on the true supremum.
pub fn annulus_decay<T: Real>(
    model: &MapModel<T>,
    k: usize,
    delta: f64,
    outer: f64,
    t_grid: &[f64],
    grid_step: f64,
) -> Result<AnnulusDecay> {
    if !(delta > 0.0 && delta < outer) {
        return Err(Error::Invalid(format!("annulus needs 0 < delta < A, got {delta}, {outer}")));
    }
    if !(grid_step > 0.0) {
        return Err(Error::Invalid("grid step must be positive".into()));
    }
    let pts = grid_points(model.dim(), grid_step, delta, outer);
    if pts.is_empty() {
        return Err(Error::Invalid("annulus grid is empty".into()));
    }
    let sup_values: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let vals: Vec<f64> = pts
                .par_iter()
                .map(|z| {
                    let zt: Vec<T> = z.iter().map(|v| T::lit(*v)).collect();
                    Ok(characteristic_function(model, k, T::lit(t), &zt)?.modulus().as_f64())
                })
                .collect::<Result<_>>()?;
            Ok(vals.into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let logs: Vec<f64> = sup_values.iter().map(|s| s.ln()).collect();
    let fit = ols(t_grid, &logs)?;
    let tau_hat = fit.slope.exp();
    if tau_hat >= LATTICE_THRESHOLD {
        return Err(Error::LatticeDetected { tau: tau_hat });
    }
    Ok(AnnulusDecay { tau_hat, r_squared: fit.r_squared, t_grid: t_grid.to_vec(), sup_values })
}

/// `|λ(t^{-1/2}ζ)^{⌊t⌋} - exp(-⟨ζ, Σζ⟩/2)|`, the quantity bounded by
/// `C t^{-1/2}` in the eigenvalue expansion.
pub fn eigenvalue_power_defect(
    model: &MapModel<f64>,
    sigma: &CovarianceMatrix<f64>,
    zeta: &[f64],
    t: f64,
) -> Result<f64> {
    let scaled: Vec<f64> = zeta.iter().map(|z| z / t.sqrt()).collect();
    let lambda = dominant_eigenvalue(model, &scaled)?;
    let z = DVector::from_column_slice(zeta);
    let quad = (z.transpose() * sigma.entries() * &z)[(0, 0)];
    let power = (lambda.ln() * t.floor()).exp();
    Ok((power - C::new((-0.5 * quad).exp(), 0.0)).modulus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{Generator, StochasticMatrix};
    use crate::model::{DiscreteMapModel, IncrementLaw, LocalTimeMapModel};

    fn iid_gaussian() -> MapModel<f64> {
        let p = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let a = IncrementLaw::Gaussian { mean: vec![-1.0], cov: vec![vec![1.0]] };
        let b = IncrementLaw::Gaussian { mean: vec![1.0], cov: vec![vec![1.0]] };
        MapModel::Discrete(
            DiscreteMapModel::new(p, vec![vec![Some(a.clone()), Some(b.clone())], vec![Some(a), Some(b)]]).unwrap(),
        )
    }

    fn point_mass_plus_one() -> MapModel<f64> {
        let p = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let a = || Some(IncrementLaw::PointMass { at: vec![1.0] });
        MapModel::Discrete(DiscreteMapModel::new(p, vec![vec![a(), a()], vec![a(), a()]]).unwrap())
    }

    fn symmetric_local_time() -> MapModel<f64> {
        let g = Generator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        MapModel::LocalTime(LocalTimeMapModel::new(g).unwrap())
    }

    fn iid_lambda(z: f64) -> f64 {
        (-z * z / 2.0).exp() * z.cos()
    }

    #[test]
    fn zero_frequency_gives_transition_matrix() {
        for model in [iid_gaussian(), symmetric_local_time()] {
            let zero = vec![0.0; model.dim()];
            for t in [1.0, 3.0] {
                let f = fourier_matrix(&model, t, &zero).unwrap();
                let p = model.transition(t).unwrap();
                assert!(norm0(&(f.entries - to_complex(&p))) < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_entries() {
        let m = point_mass_plus_one();
        let f = fourier_matrix(&m, 1.0, &[0.8]).unwrap();
        for z in f.entries.iter() {
            assert!((*z - C::new(0.0, 0.8).exp() * 0.5).modulus() < 1e-15);
        }
        assert!(matches!(fourier_matrix(&m, 1.5, &[0.8]), Err(Error::NonIntegerTime(_))));
    }

    #[test]
    fn iid_characteristic_function() {
        let m = iid_gaussian();
        for &(n, z) in &[(1u32, 0.3), (5, 0.7), (12, -1.1)] {
            let phi = characteristic_function(&m, 0, n as f64, &[z]).unwrap();
            let expect = iid_lambda(z).powi(n as i32);
            assert!((phi - C::new(expect, 0.0)).modulus() < 1e-14);
            assert!(phi.modulus() <= 1.0 + 1e-12);
        }
        assert_eq!(characteristic_function(&m, 1, 4.0, &[0.0]).unwrap(), C::new(1.0, 0.0));
    }

    #[test]
    fn discrete_semigroup_is_exact_for_unit_steps() {
        let m = iid_gaussian();
        assert_eq!(semigroup_residual(&m, 1.0, 1.0, &[0.4]).unwrap(), 0.0);
        let lt = symmetric_local_time();
        assert!(semigroup_residual(&lt, 0.7, 1.3, &[0.9]).unwrap() <= 1e-12);
        assert!(semigroup_residual(&lt, 0.7, 1.3, &[0.0]).unwrap() <= 1e-12);
    }

    #[test]
    fn dominant_at_zero() {
        let m = iid_gaussian();
        let sd = dominant_eigen(&fourier_matrix(&m, 1.0, &[0.0]).unwrap()).unwrap();
        assert!((sd.lambda - C::new(1.0, 0.0)).modulus() < 1e-12);
        for z in sd.projection.iter() {
            assert!((*z - C::new(0.5, 0.0)).modulus() < 1e-10);
        }
        for z in [0.2, 0.9, -1.3] {
            let l = dominant_eigenvalue(&m, &[z]).unwrap();
            assert!((l - C::new(iid_lambda(z), 0.0)).modulus() < 1e-12, "{z}");
        }
    }

    #[test]
    fn gap_of_two_state_chain() {
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let g = || Some(IncrementLaw::Gaussian { mean: vec![0.0], cov: vec![vec![1.0]] });
        let m = MapModel::Discrete(DiscreteMapModel::new(p, vec![vec![g(), g()], vec![g(), g()]]).unwrap());
        let sd = dominant_eigen(&fourier_matrix(&m, 1.0, &[0.0]).unwrap()).unwrap();
        assert!((sd.second_modulus - 0.7).abs() < 1e-12);
        assert!((sd.gap - 0.3).abs() < 1e-12);
        // Π rows equal π = (2/3, 1/3).
        assert!((sd.projection[(1, 0)] - C::new(2.0 / 3.0, 0.0)).modulus() < 1e-10);
    }

    #[test]
    fn eigen_tie_is_reported() {
        let p = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = || Some(IncrementLaw::Gaussian { mean: vec![0.0], cov: vec![vec![1.0]] });
        let m = MapModel::Discrete(DiscreteMapModel::new(p, vec![vec![None, g()], vec![g(), None]]).unwrap());
        assert!(matches!(
            dominant_eigen(&fourier_matrix(&m, 1.0, &[0.0]).unwrap()),
            Err(Error::EigenTie { .. })
        ));
    }

    #[test]
    fn hessian_covariances() {
        let s = spectral_covariance(&iid_gaussian()).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-6);
        let s = spectral_covariance(&symmetric_local_time()).unwrap();
        assert!((s.get(0, 0) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn centred_models_have_zero_gradient() {
        let m = iid_gaussian().center();
        let h = 1e-4;
        let up = dominant_eigenvalue(&m, &[h]).unwrap();
        let down = dominant_eigenvalue(&m, &[-h]).unwrap();
        assert!(((up - down) / (2.0 * h)).modulus() < 1e-8);
        assert!((dominant_eigenvalue(&m, &[0.0]).unwrap() - C::new(1.0, 0.0)).modulus() < 1e-12);
    }

    #[test]
    fn lattice_scans() {
        let scan = lattice_scan(&point_mass_plus_one(), 7.0, 0.05).unwrap();
        assert!(scan.is_lattice_suspected);
        assert!(scan.witnesses.iter().any(|z| (z[0] - 2.0 * std::f64::consts::PI).abs() < 0.05));
        let scan = lattice_scan(&iid_gaussian(), 7.0, 0.05).unwrap();
        assert!(!scan.is_lattice_suspected);
        let scan = lattice_scan(&symmetric_local_time(), 7.0, 0.05).unwrap();
        assert!(!scan.is_lattice_suspected, "{}", scan.max_radius);
    }

    #[test]
    fn annulus_decay_iid() {
        let ts: Vec<f64> = (1..=10).map(|i| 5.0 * i as f64).collect();
        let a = annulus_decay(&iid_gaussian(), 0, 0.5, 3.0, &ts, 0.05).unwrap();
        let direct = grid_points(1, 0.05, 0.5, 3.0).iter().map(|z| iid_lambda(z[0]).abs()).fold(0.0, f64::max);
        assert!((a.tau_hat - direct).abs() < 1e-10);
        assert!(a.r_squared > 0.999_999);
        assert!(matches!(
            annulus_decay(&point_mass_plus_one(), 0, 0.5, 3.0, &ts, 0.05),
            Err(Error::LatticeDetected { .. })
        ));
    }

    #[test]
    fn grid_points_cover_annulus() {
        let p = grid_points(1, 0.5, 1.0, 2.0);
        assert_eq!(p, vec![vec![-2.0], vec![-1.5], vec![-1.0], vec![1.0], vec![1.5], vec![2.0]]);
        assert_eq!(grid_points(2, 1.0, 0.5, 1.0).len(), 4);
    }

    #[test]
    fn single_precision_fourier() {
        let p = StochasticMatrix::<f32>::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let a = IncrementLaw::Gaussian { mean: vec![-1.0f32], cov: vec![vec![1.0]] };
        let b = IncrementLaw::Gaussian { mean: vec![1.0f32], cov: vec![vec![1.0]] };
        let m = MapModel::Discrete(
            DiscreteMapModel::new(p, vec![vec![Some(a.clone()), Some(b.clone())], vec![Some(a), Some(b)]]).unwrap(),
        );
        let l = dominant_eigenvalue(&m, &[0.5f32]).unwrap();
        assert!((l.re - iid_lambda(0.5) as f32).abs() < 1e-5);
    }
}

//! Dense helpers shared by the chain and Fourier code: Padé matrix
//! exponential, graph reachability, and small utilities.

use std::collections::VecDeque;

use nalgebra::{ComplexField, DMatrix};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

const PADE_ORDER: usize = 6;
/// Scaled norm target for the [6/6] approximant; truncation error is below 1e-16 there.
const PADE_RADIUS: f64 = 0.5;
const MAX_SQUARINGS: i32 = 64;

fn norm1<F: ComplexField>(a: &DMatrix<F>) -> F::RealField
where
    F::RealField: Real,
{
    let mut best = F::RealField::zero();
    for col in a.column_iter() {
        let s = col.iter().fold(F::RealField::zero(), |acc, z| acc + z.clone().modulus());
        if s > best {
            best = s;
        }
    }
    best
}

/// `exp(A)` by scaling and squaring with a fixed [6/6] Padé approximant.
///
/// Works for both real generators and the complex tilted generators used by
/// the Fourier matrices.
pub fn expm<F>(a: &DMatrix<F>) -> Result<DMatrix<F>>
where
    F: ComplexField + Copy,
    F::RealField: Real,
{
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Invalid("matrix exponential of a non-square matrix".into()));
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::ExpOverflow { norm: norm.as_f64() });
    }
    let mut squarings = 0i32;
    let radius = F::RealField::lit(PADE_RADIUS);
    if norm > radius {
        let ratio = (norm / radius).as_f64();
        squarings = ratio.log2().ceil() as i32;
        if squarings > MAX_SQUARINGS {
            return Err(Error::ExpOverflow { norm: norm.as_f64() });
        }
    }
    let scale = F::from_real(F::RealField::lit(0.5f64.powi(squarings)));
    let x = a * scale;

    let mut coeff = F::RealField::one();
    let mut num = DMatrix::<F>::identity(n, n);
    let mut den = DMatrix::<F>::identity(n, n);
    let mut power = DMatrix::<F>::identity(n, n);
    let q = PADE_ORDER as f64;
    for k in 1..=PADE_ORDER {
        let kf = k as f64;
        coeff *= F::RealField::lit((q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0)));
        power = &power * &x;
        let term = &power * F::from_real(coeff);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::SingularSystem("Padé denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Integer power by repeated squaring.
pub fn matrix_power<F>(a: &DMatrix<F>, mut exp: u64) -> DMatrix<F>
where
    F: ComplexField + Copy,
{
    let n = a.nrows();
    let mut result = DMatrix::<F>::identity(n, n);
    let mut base = a.clone();
    let mut first = true;
    while exp > 0 {
        if exp & 1 == 1 {
            result = if first { base.clone() } else { &result * &base };
            first = false;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    result
}

/// States reachable from `start` along edges `i -> j` where `edge(i, j)` holds.
pub fn reachable(n: usize, start: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Strong connectivity by a forward and a backward search from state 0.
/// On failure returns the first unreachable state and the direction's source.
pub fn strongly_connected(
    n: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> std::result::Result<(), (usize, usize)> {
    if n == 0 {
        return Ok(());
    }
    let fwd = reachable(n, 0, &edge);
    if let Some(j) = fwd.iter().position(|&r| !r) {
        return Err((0, j));
    }
    let bwd = reachable(n, 0, |i, j| edge(j, i));
    if let Some(j) = bwd.iter().position(|&r| !r) {
        return Err((j, 0));
    }
    Ok(())
}

/// Period of a strongly connected graph: gcd over edges of level differences
/// in a BFS tree rooted at state 0.
pub fn period(n: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if edge(i, j) && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0usize;
    for i in 0..n {
        for j in 0..n {
            if edge(i, j) && level[i] != usize::MAX && level[j] != usize::MAX {
                let diff = (level[i] + 1).abs_diff(level[j]);
                g = gcd(g, diff);
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Eigenvalues of a symmetric real matrix, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let mut ev: Vec<T> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

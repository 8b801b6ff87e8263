use nalgebra::DMatrix;
use serde::Serialize;

use super::SampleSet;
use crate::error::{Error, Result};

/// Running count, mean, co-moment matrix and third absolute moment.
///
/// `merge` uses the pairwise update of Chan, Golub and LeVeque, so merging
/// partial accumulators matches a single pass up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingMoments {
    count: u64,
    mean: Vec<f64>,
    /// Row-major `dim × dim` sum of centred outer products.
    comoment: Vec<f64>,
    abs3_sum: f64,
}

impl StreamingMoments {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], comoment: vec![0.0; dim * dim], abs3_sum: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += delta[j] * after;
            }
        }
        self.abs3_sum += x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(3);
    }

    pub fn merge(&mut self, other: &StreamingMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] += other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
        self.abs3_sum += other.abs3_sum;
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let denom = (self.count.max(2) - 1) as f64;
        DMatrix::from_fn(d, d, |i, j| self.comoment[i * d + j] / denom)
    }

    /// Mean of `‖x‖³` (not centred).
    pub fn third_abs_moment(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.abs3_sum / self.count as f64
        }
    }

    pub fn from_rows(values: &[f64], dim: usize) -> Self {
        let mut m = Self::new(dim);
        for row in values.chunks_exact(dim) {
            m.push(row);
        }
        m
    }
}

pub const JACKKNIFE_GROUPS: usize = 20;

/// Covariance of `t^{-1/2} Y_t` with delete-one-group jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub count: u64,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_se: Vec<Vec<f64>>,
    pub third_abs_moment: f64,
}

impl CovarianceEstimate {
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.covariance.len();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn empirical_covariance(samples: &SampleSet, scale_t: f64) -> Result<CovarianceEstimate> {
    const MIN_SAMPLES: usize = 1000;
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SAMPLES, got: n });
    }
    if !(scale_t > 0.0) {
        return Err(Error::Invalid(format!("scale must be positive, got {scale_t}")));
    }
    let d = samples.dim;
    let s = scale_t.sqrt().recip();
    let per_group = n.div_ceil(JACKKNIFE_GROUPS);
    let groups: Vec<StreamingMoments> = samples
        .values
        .chunks(per_group * d)
        .map(|chunk| {
            let mut m = StreamingMoments::new(d);
            let mut row = vec![0.0; d];
            for r in chunk.chunks_exact(d) {
                for (o, v) in row.iter_mut().zip(r) {
                    *o = v * s;
                }
                m.push(&row);
            }
            m
        })
        .collect();
    let mut total = StreamingMoments::new(d);
    for g in &groups {
        total.merge(g);
    }
    let cov = total.covariance();
    let leave_out: Vec<DMatrix<f64>> = (0..groups.len())
        .map(|skip| {
            let mut m = StreamingMoments::new(d);
            for (i, g) in groups.iter().enumerate() {
                if i != skip {
                    m.merge(g);
                }
            }
            m.covariance()
        })
        .collect();
    let gcount = leave_out.len() as f64;
    let avg = leave_out.iter().fold(DMatrix::zeros(d, d), |a, c| a + c) / gcount;
    let var = leave_out.iter().fold(DMatrix::zeros(d, d), |a, c| {
        let diff = c - &avg;
        a + diff.component_mul(&diff)
    }) * ((gcount - 1.0) / gcount);
    let mean_se = (0..d).map(|i| (cov[(i, i)] / n as f64).sqrt()).collect();
    Ok(CovarianceEstimate {
        count: total.count(),
        mean: total.mean().to_vec(),
        mean_se,
        covariance: to_rows(&cov),
        covariance_se: to_rows(&var.map(f64::sqrt)),
        third_abs_moment: total.third_abs_moment(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<f64> {
        (0..n).flat_map(|i| {
            let x = (i as f64 * 0.37).sin() * 3.0 + 1.0;
            let y = (i as f64 * 1.3).cos() - 0.5 * x;
            [x, y]
        })
        .collect()
    }

    #[test]
    fn merge_matches_single_pass() {
        let v = rows(5000);
        let whole = StreamingMoments::from_rows(&v, 2);
        let mut a = StreamingMoments::from_rows(&v[..2 * 1234], 2);
        let b = StreamingMoments::from_rows(&v[2 * 1234..], 2);
        a.merge(&b);
        let (c1, c2) = (whole.covariance(), a.covariance());
        for (x, y) in c1.iter().zip(c2.iter()) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300));
        }
        assert!((whole.third_abs_moment() - a.third_abs_moment()).abs() < 1e-10 * whole.third_abs_moment());
    }

    #[test]
    fn deterministic_samples_have_zero_covariance() {
        let s = SampleSet {
            start_state: 0,
            horizon: 4.0,
            dim: 1,
            end_states: vec![0; 2000],
            values: vec![3.0; 2000],
        };
        let e = empirical_covariance(&s, 4.0).unwrap();
        assert_eq!(e.covariance, vec![vec![0.0]]);
        assert_eq!(e.covariance_se, vec![vec![0.0]]);
        assert_eq!(e.mean, vec![1.5]);
    }

    #[test]
    fn too_few_samples() {
        let s = SampleSet { start_state: 0, horizon: 1.0, dim: 1, end_states: vec![0; 10], values: vec![0.0; 10] };
        assert!(matches!(empirical_covariance(&s, 1.0), Err(Error::InsufficientSamples { .. })));
    }
}

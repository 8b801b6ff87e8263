use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::CovarianceMatrix;

/// Evenly spaced points `lo + i·step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn hi(&self) -> f64 {
        self.point(self.count - 1)
    }
}

/// Rectangular lattice; values are stored with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    /// Coordinates of flat index `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut out = vec![0.0; self.dim()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis.point(rem % axis.count);
            rem /= axis.count;
        }
        out
    }

    /// `±5σ_j` per axis with step `0.05σ_j` in 1D and `0.1σ_j` in 2D.
    pub fn standard(sigma: &CovarianceMatrix<f64>) -> Self {
        let d = sigma.dim();
        let (half_steps, frac) = if d == 1 { (100usize, 0.05) } else { (50usize, 0.1) };
        Grid {
            axes: (0..d)
                .map(|j| {
                    let s = sigma.get(j, j).sqrt();
                    Axis { lo: -5.0 * s, step: frac * s, count: 2 * half_steps + 1 }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub sample_count: usize,
}

impl EmpiricalDensity {
    /// Riemann sum of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `max |f̂ - target|` over the grid.
    pub fn sup_error(&self, target: &[f64]) -> f64 {
        self.values.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Kernel support in bandwidths; the Gaussian mass beyond it is ~2e-9.
const KERNEL_CUTOFF: f64 = 6.0;
const CHUNK: usize = 1 << 16;
pub const MIN_KDE_SAMPLES: usize = 10_000;

/// Silverman's rule: `1.06 σ̂ m^{-1/5}` in 1D, `σ̂_j m^{-1/(d+4)} (4/(d+2))^{1/(d+4)}` otherwise.
pub fn silverman_bandwidth(values: &[f64], dim: usize) -> Vec<f64> {
    let m = super::StreamingMoments::from_rows(values, dim);
    let cov = m.covariance();
    let count = m.count() as f64;
    (0..dim)
        .map(|j| {
            let s = cov[(j, j)].sqrt();
            if dim == 1 {
                1.06 * s * count.powf(-0.2)
            } else {
                let d = dim as f64;
                s * (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * count.powf(-1.0 / (d + 4.0))
            }
        })
        .collect()
}

fn axis_weights(axis: &Axis, x: f64, h: f64, start: &mut usize, w: &mut Vec<f64>) {
    w.clear();
    let reach = KERNEL_CUTOFF * h;
    let lo = ((x - reach - axis.lo) / axis.step).ceil().max(0.0);
    let hi = ((x + reach - axis.lo) / axis.step).floor().min(axis.count as f64 - 1.0);
    if hi < lo {
        *start = 0;
        return;
    }
    *start = lo as usize;
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    for i in lo as usize..=hi as usize {
        let u = (axis.point(i) - x) / h;
        w.push(norm * (-0.5 * u * u).exp());
    }
}

/// Product-Gaussian kernel density estimate on `grid` from row-major points.
pub fn kde_density(points: &[f64], dim: usize, grid: &Grid, bandwidth: &[f64]) -> Result<EmpiricalDensity> {
    if !(dim == 1 || dim == 2) || grid.dim() != dim || bandwidth.len() != dim {
        return Err(Error::Invalid(format!("KDE supports dimension 1 or 2, got {dim}")));
    }
    let count = points.len() / dim;
    if count < MIN_KDE_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_KDE_SAMPLES, got: count });
    }
    for (h, axis) in bandwidth.iter().zip(&grid.axes) {
        if !(*h > 0.0) {
            return Err(Error::Invalid(format!("bandwidth must be positive, got {h}")));
        }
        if *h < axis.step / 4.0 {
            return Err(Error::BandwidthTooSmall { bandwidth: *h, step: axis.step });
        }
    }
    let len = grid.len();
    let partials: Vec<Vec<f64>> = points
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut acc = vec![0.0; len];
            let (mut s0, mut s1) = (0usize, 0usize);
            let (mut w0, mut w1) = (Vec::new(), Vec::new());
            for row in chunk.chunks_exact(dim) {
                axis_weights(&grid.axes[0], row[0], bandwidth[0], &mut s0, &mut w0);
                if dim == 1 {
                    for (i, w) in w0.iter().enumerate() {
                        acc[s0 + i] += w;
                    }
                } else {
                    axis_weights(&grid.axes[1], row[1], bandwidth[1], &mut s1, &mut w1);
                    let stride = grid.axes[1].count;
                    for (i, a) in w0.iter().enumerate() {
                        let base = (s0 + i) * stride + s1;
                        for (j, b) in w1.iter().enumerate() {
                            acc[base + j] += a * b;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; len];
    for p in &partials {
        for (v, x) in values.iter_mut().zip(p) {
            *v += x;
        }
    }
    let inv = 1.0 / count as f64;
    values.iter_mut().for_each(|v| *v *= inv);
    Ok(EmpiricalDensity { grid: grid.clone(), values, bandwidth: bandwidth.to_vec(), sample_count: count })
}

/// `η_Σ(y) = (2π)^{-d/2} (det Σ)^{-1/2} exp(-⟨y, Σ⁻¹y⟩/2)` on the grid.
pub fn gaussian_density(sigma: &CovarianceMatrix<f64>, grid: &Grid) -> Result<Vec<f64>> {
    let inv = sigma.inverse()?;
    let d = sigma.dim();
    if grid.dim() != d {
        return Err(Error::Invalid(format!("grid has dimension {}, covariance {d}", grid.dim())));
    }
    let norm = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) * sigma.determinant().powf(-0.5);
    Ok((0..grid.len())
        .map(|idx| {
            let y = DVector::from_vec(grid.point(idx));
            let q = (y.transpose() * &inv * &y)[(0, 0)];
            norm * (-0.5 * q).exp()
        })
        .collect())
}

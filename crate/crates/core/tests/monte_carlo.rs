//! The simulators against exact quantities: each entry of the Fourier matrix
//! is an expectation, so a sample average must land within a few standard
//! errors of it.

use mapllt::harness::experiments::{exact_scaled_mean, sample_paths};
use mapllt::harness::parse_model;
use mapllt::model::MapModel;
use mapllt::simulate::{local_time_vectors, SampleSet, SeedSpec};
use mapllt::spectral::fourier_matrix;

const Z_LIMIT: f64 = 4.5;

fn load(text: &str) -> MapModel<f64> {
    parse_model(text, "inline").unwrap().model
}

const SYMMETRIC: &str = r#"
[meta]
name = "sym"
dimension = 1
[chain]
kind = "generator"
rows = [[-1.0, 1.0], [1.0, -1.0]]
"#;

const THREE: &str = r#"
[meta]
name = "three"
dimension = 2
[chain]
kind = "generator"
rows = [[-2.0, 1.0, 1.0], [1.0, -3.0, 2.0], [2.0, 1.0, -3.0]]
"#;

const MARKOV_GAUSSIAN: &str = r#"
[meta]
name = "mg"
dimension = 1
[chain]
kind = "stochastic"
rows = [[0.8, 0.2], [0.3, 0.7]]
[[increments]]
from = 1
to = 1
law = { kind = "gaussian", mean = [0.5], cov = [[1.0]] }
[[increments]]
from = 1
to = 2
law = { kind = "uniform_box", lo = [-2.0], hi = [0.0] }
[[increments]]
from = 2
to = 1
law = { kind = "point_mass", at = [1.0] }
[[increments]]
from = 2
to = 2
law = { kind = "mixture", weights = [0.25, 0.75], components = [
  { kind = "gaussian", mean = [-1.0], cov = [[0.5]] },
  { kind = "point_mass", at = [0.0] },
] }
"#;

/// Largest z-score between the sample Fourier row of `k` and the exact one.
fn fourier_z(model: &MapModel<f64>, samples: &SampleSet, t: f64, zeta: &[f64]) -> f64 {
    let exact = fourier_matrix(model, t, zeta).unwrap().entries;
    let n = model.n();
    let k = samples.start_state;
    let count = samples.len() as f64;
    let mut worst = 0.0f64;
    for l in 0..n {
        let (mut re, mut im, mut re2, mut im2) = (0.0, 0.0, 0.0, 0.0);
        for s in samples.iter().filter(|s| s.end_state == l) {
            let phase: f64 = s.y.iter().zip(zeta).map(|(y, z)| y * z).sum();
            re += phase.cos();
            im += phase.sin();
            re2 += phase.cos().powi(2);
            im2 += phase.sin().powi(2);
        }
        let (mr, mi) = (re / count, im / count);
        let se_r = ((re2 / count - mr * mr) / count).sqrt().max(1e-12);
        let se_i = ((im2 / count - mi * mi) / count).sqrt().max(1e-12);
        worst = worst.max((mr - exact[(k, l)].re).abs() / se_r).max((mi - exact[(k, l)].im).abs() / se_i);
    }
    worst
}

#[test]
fn local_time_fourier_matrix_matches_simulation() {
    let m = load(SYMMETRIC);
    for (k, t, z) in [(0, 3.0, 0.7), (1, 0.5, 2.0), (0, 10.0, 0.3)] {
        let s = sample_paths(&m, k, t, 200_000, SeedSpec::new(11, k as u64)).unwrap();
        let worst = fourier_z(&m, &s, t, &[z]);
        assert!(worst < Z_LIMIT, "t = {t}, zeta = {z}: {worst:.2} SE");
    }
    let m = load(THREE);
    for (k, t, zeta) in [(0, 2.0, [0.5, -0.3]), (2, 4.0, [1.2, 0.8])] {
        let s = sample_paths(&m, k, t, 200_000, SeedSpec::new(12, k as u64)).unwrap();
        let worst = fourier_z(&m, &s, t, &zeta);
        assert!(worst < Z_LIMIT, "t = {t}, zeta = {zeta:?}: {worst:.2} SE");
    }
}

#[test]
fn discrete_fourier_matrix_matches_simulation() {
    let m = load(MARKOV_GAUSSIAN);
    for (k, t, z) in [(0, 1.0, 0.9), (1, 3.0, 0.6), (0, 8.0, 0.25)] {
        let s = sample_paths(&m, k, t, 200_000, SeedSpec::new(13, k as u64)).unwrap();
        let worst = fourier_z(&m, &s, t, &[z]);
        assert!(worst < Z_LIMIT, "n = {t}, zeta = {z}: {worst:.2} SE");
    }
}

#[test]
fn sample_means_match_exact_finite_horizon_means() {
    for (text, k, t) in [(SYMMETRIC, 0, 5.0), (THREE, 1, 3.0), (MARKOV_GAUSSIAN, 1, 6.0)] {
        let m = load(text);
        let s = sample_paths(&m, k, t, 100_000, SeedSpec::new(14, 0)).unwrap();
        let exact = exact_scaled_mean(&m, k, t).unwrap();
        let d = s.dim;
        for j in 0..d {
            let col: Vec<f64> = s.values.iter().skip(j).step_by(d).map(|v| v / t.sqrt()).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let se = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            assert!((mean - exact[j]).abs() < Z_LIMIT * se, "coordinate {j}: {mean} vs {}", exact[j]);
        }
    }
}

#[test]
fn streams_are_reproducible_and_thread_count_free() {
    let m = load(THREE);
    let run = |threads: usize, seed: SeedSpec| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample_paths(&m, 0, 5.0, 10_000, seed).unwrap())
    };
    let a = run(1, SeedSpec::new(5, 0));
    let b = run(4, SeedSpec::new(5, 0));
    assert_eq!(a, b);
    assert_ne!(a.values, run(2, SeedSpec::new(5, 1)).values);
    assert_ne!(a.values, run(2, SeedSpec::new(6, 0)).values);
}

#[test]
fn projected_samples_are_the_centred_raw_local_times() {
    let m = load(THREE);
    let MapModel::LocalTime(lt) = &m else { unreachable!() };
    let seed = SeedSpec::new(3, 9);
    let raw = local_time_vectors(lt, 1, 7.0, 5000, seed).unwrap();
    let proj = sample_paths(&m, 1, 7.0, 5000, seed).unwrap();
    let pi = lt.stationary().weights();
    assert_eq!(raw.end_states, proj.end_states);
    for (r, p) in raw.values.chunks(3).zip(proj.values.chunks(2)) {
        for j in 0..2 {
            assert!((r[j] - 7.0 * pi[j] - p[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn binary_dump_layout() {
    let m = load(THREE);
    let s = sample_paths(&m, 2, 1.5, 10, SeedSpec::new(1, 1)).unwrap();
    let mut buf = Vec::new();
    s.write_binary(&mut buf).unwrap();
    assert_eq!(buf.len(), 10 * (3 + 2) * 8);
    let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
    assert_eq!(f(0), 2.0);
    assert_eq!(f(1), 1.5);
    assert_eq!(f(2), s.end_states[0] as f64);
    assert_eq!((f(3), f(4)), (s.values[0], s.values[1]));
}

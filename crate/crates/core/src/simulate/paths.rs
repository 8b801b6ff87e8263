use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use super::SeedSpec;
use crate::error::{Error, Result};
use crate::markov::CovarianceMatrix;
use crate::model::{DiscreteMapModel, IncrementLaw, LocalTimeMapModel};

/// Paths per RNG block; block `b` of a run draws from `seed.fork(b)`.
pub const BLOCK_PATHS: usize = 4096;

/// One simulated path: end state and additive value at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample<'a> {
    pub start_state: usize,
    pub horizon: f64,
    pub end_state: usize,
    pub y: &'a [f64],
}

/// Column store of path samples sharing a start state and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub start_state: usize,
    pub horizon: f64,
    pub dim: usize,
    pub end_states: Vec<u32>,
    /// Row-major, `dim` values per path.
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.end_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.end_states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PathSample<'_>> + '_ {
        self.end_states.iter().zip(self.values.chunks_exact(self.dim.max(1))).map(move |(e, y)| PathSample {
            start_state: self.start_state,
            horizon: self.horizon,
            end_state: *e as usize,
            y,
        })
    }

    /// Rows scaled by `t^{-1/2}`.
    pub fn scaled_values(&self) -> Vec<f64> {
        let s = self.horizon.sqrt().recip();
        self.values.iter().map(|v| v * s).collect()
    }

    /// Little-endian `f64` rows `[start, horizon, end, y...]`.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        for s in self.iter() {
            w.write_all(&(s.start_state as f64).to_le_bytes())?;
            w.write_all(&s.horizon.to_le_bytes())?;
            w.write_all(&(s.end_state as f64).to_le_bytes())?;
            for v in s.y {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    fn concat(start_state: usize, horizon: f64, dim: usize, blocks: Vec<(Vec<u32>, Vec<f64>)>) -> Self {
        let mut end_states = Vec::with_capacity(blocks.iter().map(|b| b.0.len()).sum());
        let mut values = Vec::with_capacity(end_states.capacity() * dim);
        for (e, v) in blocks {
            end_states.extend(e);
            values.extend(v);
        }
        SampleSet { start_state, horizon, dim, end_states, values }
    }
}

fn run_blocks<F>(paths: usize, seed: SeedSpec, dim: usize, body: F) -> Vec<(Vec<u32>, Vec<f64>)>
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) -> u32 + Sync,
{
    let blocks = paths.div_ceil(BLOCK_PATHS);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_PATHS.min(paths - b * BLOCK_PATHS);
            let mut rng = seed.fork(b as u64).rng();
            let mut ends = Vec::with_capacity(count);
            let mut vals = Vec::with_capacity(count * dim);
            for _ in 0..count {
                ends.push(body(&mut rng, &mut vals));
            }
            (ends, vals)
        })
        .collect()
}

/// Sampler with the per-law factorisations precomputed.
enum CompiledLaw {
    Point(Vec<f64>),
    Gaussian { mean: Vec<f64>, factor: DMatrix<f64> },
    Uniform { lo: Vec<f64>, width: Vec<f64> },
    Mixture { cumulative: Vec<f64>, components: Vec<CompiledLaw> },
}

impl CompiledLaw {
    fn new(law: &IncrementLaw<f64>) -> Self {
        match law {
            IncrementLaw::PointMass { at } => CompiledLaw::Point(at.clone()),
            IncrementLaw::Gaussian { mean, cov } => {
                let d = mean.len();
                let c = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                // Symmetric square root so singular covariances are fine too.
                let eig = c.symmetric_eigen();
                let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                let factor = &eig.eigenvectors * DMatrix::from_diagonal(&root);
                CompiledLaw::Gaussian { mean: mean.clone(), factor }
            }
            IncrementLaw::UniformBox { lo, hi } => CompiledLaw::Uniform {
                lo: lo.clone(),
                width: lo.iter().zip(hi).map(|(a, b)| b - a).collect(),
            },
            IncrementLaw::Mixture { weights, components } => {
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                CompiledLaw::Mixture { cumulative, components: components.iter().map(CompiledLaw::new).collect() }
            }
        }
    }

    fn add_sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            CompiledLaw::Point(a) => out.iter_mut().zip(a).for_each(|(o, v)| *o += v),
            CompiledLaw::Gaussian { mean, factor } => {
                let d = mean.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    let mut v = mean[i];
                    for (j, zj) in z.iter().enumerate() {
                        v += factor[(i, j)] * zj;
                    }
                    out[i] += v;
                }
            }
            CompiledLaw::Uniform { lo, width } => {
                for i in 0..lo.len() {
                    out[i] += lo[i] + width[i] * rng.random::<f64>();
                }
            }
            CompiledLaw::Mixture { cumulative, components } => {
                let u: f64 = rng.random();
                let idx = cumulative.iter().position(|c| u < *c).unwrap_or(components.len() - 1);
                components[idx].add_sample(rng, out);
            }
        }
    }
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1)
}

/// `paths` independent draws of `(X_n, Y_n)` under `P_{k0}`.
pub fn simulate_discrete(
    model: &DiscreteMapModel<f64>,
    k0: usize,
    steps: u64,
    paths: usize,
    seed: SeedSpec,
) -> Result<SampleSet> {
    let n = model.n();
    if k0 >= n {
        return Err(Error::Invalid(format!("start state {} out of range", k0 + 1)));
    }
    if steps == 0 || paths == 0 {
        return Err(Error::Invalid("need at least one step and one path".into()));
    }
    let d = model.dim();
    let p = model.transition();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut acc = 0.0;
            (0..n)
                .map(|l| {
                    acc += p.get(k, l);
                    acc
                })
                .collect()
        })
        .collect();
    let laws: Vec<Option<CompiledLaw>> =
        (0..n * n).map(|i| model.law(i / n, i % n).map(CompiledLaw::new)).collect();
    let blocks = run_blocks(paths, seed, d, |rng, out| {
        let base = out.len();
        out.resize(base + d, 0.0);
        let mut k = k0;
        for _ in 0..steps {
            let l = pick(&rows[k], rng.random());
            if let Some(law) = &laws[k * n + l] {
                law.add_sample(rng, &mut out[base..]);
            }
            k = l;
        }
        k as u32
    });
    Ok(SampleSet::concat(k0, steps as f64, d, blocks))
}

/// Draws from `N(0, Σ)`, one row per sample; the density-estimation control.
pub fn gaussian_samples(sigma: &CovarianceMatrix<f64>, count: usize, seed: SeedSpec) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let d = sigma.dim();
    let e = sigma.entries();
    let law = CompiledLaw::new(&IncrementLaw::Gaussian {
        mean: vec![0.0; d],
        cov: (0..d).map(|i| (0..d).map(|j| e[(i, j)]).collect()).collect(),
    });
    let blocks = run_blocks(count, seed, d, |rng, out| {
        let base = out.len();
        out.resize(base + d, 0.0);
        law.add_sample(rng, &mut out[base..]);
        0
    });
    Ok(SampleSet::concat(0, 1.0, d, blocks))
}

struct JumpChain {
    rates: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
}

impl JumpChain {
    fn new(model: &LocalTimeMapModel<f64>) -> Self {
        let g = model.generator();
        let n = g.n();
        let rates: Vec<f64> = (0..n).map(|i| g.exit_rate(i)).collect();
        let cumulative = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                (0..n)
                    .map(|j| {
                        if j != i {
                            acc += g.get(i, j) / rates[i];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { rates, cumulative }
    }

    /// Fills `local` with the occupation times on `[0, t]`; returns the end state.
    fn run(&self, rng: &mut ChaCha8Rng, k0: usize, t: f64, local: &mut [f64]) -> usize {
        let mut k = k0;
        let mut clock = 0.0;
        loop {
            let hold: f64 = rng.sample::<f64, _>(Exp1) / self.rates[k];
            if clock + hold >= t {
                // Final sojourn is cut at the horizon so the total is exactly t.
                local[k] += t - clock;
                return k;
            }
            local[k] += hold;
            clock += hold;
            k = pick(&self.cumulative[k], rng.random());
        }
    }
}

fn check_local_time_args(model: &LocalTimeMapModel<f64>, k0: usize, t: f64, paths: usize) -> Result<()> {
    if k0 >= model.n() {
        return Err(Error::Invalid(format!("start state {} out of range", k0 + 1)));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Invalid(format!("horizon must be positive, got {t}")));
    }
    if paths == 0 {
        return Err(Error::Invalid("need at least one path".into()));
    }
    Ok(())
}

/// Raw local-time vectors `L_t ∈ R^n` (not centred, not projected).
pub fn local_time_vectors(
    model: &LocalTimeMapModel<f64>,
    k0: usize,
    t: f64,
    paths: usize,
    seed: SeedSpec,
) -> Result<SampleSet> {
    check_local_time_args(model, k0, t, paths)?;
    let n = model.n();
    let chain = JumpChain::new(model);
    let blocks = run_blocks(paths, seed, n, |rng, out| {
        let base = out.len();
        out.resize(base + n, 0.0);
        chain.run(rng, k0, t, &mut out[base..]) as u32
    });
    Ok(SampleSet::concat(k0, t, n, blocks))
}

/// Centred projected local times `Λ(L_t - tπ)`, one row per path.
///
/// Uses the same random streams as [`local_time_vectors`], so for equal seeds
/// the rows are the transformed raw vectors.
pub fn simulate_ctmc_local_times(
    model: &LocalTimeMapModel<f64>,
    k0: usize,
    t: f64,
    paths: usize,
    seed: SeedSpec,
) -> Result<SampleSet> {
    check_local_time_args(model, k0, t, paths)?;
    let n = model.n();
    let pi = model.drift();
    let chain = JumpChain::new(model);
    let blocks = run_blocks(paths, seed, n - 1, |rng, out| {
        let mut local = [0.0f64; crate::markov::MAX_STATES];
        let end = chain.run(rng, k0, t, &mut local[..n]);
        out.extend((0..n - 1).map(|j| local[j] - t * pi[j]));
        end as u32
    });
    Ok(SampleSet::concat(k0, t, n - 1, blocks))
}

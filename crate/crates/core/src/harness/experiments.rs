use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BandwidthPolicy, ExperimentConfig, LatticeGrid, Purpose, ZetaGrid};
use super::modelfile::{parse_model, LoadedModel};
use super::rate::{fit_rate, RateFit};
use super::report::{Check, Report};
use crate::error::{Error, Result};
use crate::markov::{self, CovarianceMatrix, IpStatus};
use crate::model::{integer_time, moment_bound, region_dt, LocalTimeMapModel, MapModel, MomentBound};
use crate::simulate::{
    empirical_covariance, gaussian_density, gaussian_samples, kde_density, silverman_bandwidth, simulate_ctmc_local_times,
    simulate_discrete, CovarianceEstimate, Grid, SampleSet, SeedSpec,
};
use crate::spectral::{
    characteristic_function, dominant_eigen, fourier_matrix, grid_points, lattice_scan, spectral_covariance,
    annulus_decay, AnnulusDecay, LatticeScan,
};

/// Horizon and path count of the Monte Carlo covariance route in `analyze`.
pub const ANALYZE_HORIZON: f64 = 200.0;
pub const ANALYZE_PATHS: usize = 100_000;
/// Relative agreement required between the two deterministic covariance routes.
pub const ROUTE_AGREEMENT: f64 = 1e-4;

/// Stream reserved for the synthetic Gaussian control of density runs.
const CONTROL_STREAM: u64 = u64::MAX;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// A validated config together with its model and hash.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub loaded: LoadedModel,
    pub config_hash: String,
}

impl Setup {
    pub fn new(config: ExperimentConfig, purpose: Purpose) -> Result<Self> {
        let origin = config.model.display().to_string();
        let text = std::fs::read_to_string(&config.model)
            .map_err(|e| Error::config(format!("model = {origin}"), format!("cannot read model file: {e}")))?;
        let loaded = parse_model(&text, &origin)?;
        config.validate(purpose, loaded.meta.states)?;
        let config_hash = config.hash(text.as_bytes());
        Ok(Self { config, loaded, config_hash })
    }

    fn start(&self) -> usize {
        self.config.start_state - 1
    }

    fn report<R, S>(&self, command: &str, results: Vec<R>, summary: S, checks: Vec<Check>) -> Report<R, S> {
        Report {
            command: command.into(),
            model: self.loaded.meta.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
            results,
            summary,
            checks,
        }
    }
}

/// `n` paths of `Y_t` from state `k0` (local times are centred and projected).
pub fn sample_paths(model: &MapModel<f64>, k0: usize, t: f64, n: usize, seed: SeedSpec) -> Result<SampleSet> {
    match model {
        MapModel::Discrete(m) => simulate_discrete(m, k0, integer_time(t)?, n, seed),
        MapModel::LocalTime(m) => simulate_ctmc_local_times(m, k0, t, n, seed),
    }
}

/// Exact `E_k[t^{-1/2} Y_t]` of the centred model. It is `O(t^{-1/2})`, not zero.
pub fn exact_scaled_mean(model: &MapModel<f64>, k: usize, t: f64) -> Result<Vec<f64>> {
    let raw: Vec<f64> = match model {
        MapModel::Discrete(m) => {
            let steps = integer_time(t)?;
            let n = m.n();
            let p = m.transition().entries();
            // h(k) = E_k[ξ], accumulated as Σ_{j<steps} P^j h.
            let mut h: Vec<DVector<f64>> = (0..n)
                .map(|k| {
                    (0..n).fold(DVector::zeros(m.dim()), |acc, l| match m.law(k, l) {
                        Some(law) => acc + law.mean() * p[(k, l)],
                        None => acc,
                    })
                })
                .collect();
            let mut total = DVector::zeros(m.dim());
            for _ in 0..steps {
                total += &h[k];
                h = (0..n).map(|i| (0..n).fold(DVector::zeros(m.dim()), |acc, j| acc + &h[j] * p[(i, j)])).collect();
            }
            total.iter().copied().collect()
        }
        MapModel::LocalTime(m) => {
            // ∫₀ᵗ (e^{sG} - 1ᵀπ) ds = (I - e^{tG}) D
            let d = markov::deviation_matrix(m.generator())?;
            let e = markov::matrix_exp(m.generator(), t)?;
            let n = m.n();
            let v = (DMatrix::identity(n, n) - e.entries()) * d.entries();
            (0..n - 1).map(|j| v[(k, j)]).collect()
        }
    };
    Ok(raw.into_iter().map(|x| x / t.sqrt()).collect())
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceRoute {
    pub route: String,
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub stationary: Vec<f64>,
    pub drift: Vec<f64>,
    pub ip: IpStatus,
    /// Irreducibility of the sub-generator with state `i` removed (local times only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgenerator_irreducible: Option<Vec<bool>>,
    pub moment_bounds: [MomentBound; 2],
    pub deterministic_gap: Option<f64>,
    pub monte_carlo: Option<CovarianceEstimate>,
}

fn ip_status(model: &MapModel<f64>) -> Result<IpStatus> {
    Ok(match model {
        MapModel::Discrete(m) => markov::check_ip(m.transition()),
        MapModel::LocalTime(m) => markov::check_ip(&markov::matrix_exp(m.generator(), 1.0)?),
    })
}

/// `π`, Σ by the deviation/fundamental-matrix route, the spectral route and
/// Monte Carlo, plus the structural checks.
pub fn analyze(loaded: &LoadedModel, seed: SeedSpec) -> Result<Report<CovarianceRoute, AnalyzeSummary>> {
    let model = &loaded.model;
    let ip = ip_status(model)?;
    let exact = model.exact_covariance();
    let spectral = spectral_covariance(model);
    let mc = sample_paths(model, 0, ANALYZE_HORIZON, ANALYZE_PATHS, seed)
        .and_then(|s| empirical_covariance(&s, ANALYZE_HORIZON));

    let route = |name: &str, r: &Result<CovarianceMatrix<f64>>| CovarianceRoute {
        route: name.into(),
        sigma: r.as_ref().ok().map(|c| rows(c.entries())),
        stderr: None,
        error: r.as_ref().err().map(|e| e.to_string()),
    };
    let mut results = vec![route("deviation", &exact), route("spectral", &spectral)];
    results.push(match &mc {
        Ok(e) => CovarianceRoute {
            route: "monte_carlo".into(),
            sigma: Some(e.covariance.clone()),
            stderr: Some(e.covariance_se.clone()),
            error: None,
        },
        Err(e) => CovarianceRoute { route: "monte_carlo".into(), sigma: None, stderr: None, error: Some(e.to_string()) },
    });

    let mut checks = vec![Check::new(
        "irreducible and aperiodic",
        ip.holds(),
        format!("irreducible {}, aperiodic {:?}", ip.irreducible, ip.aperiodic),
    )];
    let gap = match (&exact, &spectral) {
        (Ok(a), Ok(b)) => Some(relative_gap(a.entries(), b.entries())),
        _ => None,
    };
    checks.push(Check::new(
        "deterministic covariance routes agree",
        gap.is_some_and(|g| g <= ROUTE_AGREEMENT),
        match gap {
            Some(g) => format!("relative gap {g:.3e}, limit {ROUTE_AGREEMENT:.0e}"),
            None => "a deterministic route failed".into(),
        },
    ));
    if let (Ok(a), Ok(e)) = (&exact, &mc) {
        let z = max_z(a.entries(), &e.matrix(), &e.covariance_se);
        checks.push(Check::new(
            "Monte Carlo covariance within 3 SE",
            z <= 3.0,
            format!("largest |deviation|/SE = {z:.2} at t = {ANALYZE_HORIZON}, {ANALYZE_PATHS} paths"),
        ));
    }
    let subgenerator_irreducible = match model {
        MapModel::LocalTime(m) => {
            Some((0..m.n()).map(|i| markov::subgenerator_irreducible(m.generator(), i)).collect())
        }
        MapModel::Discrete(_) => None,
    };
    let summary = AnalyzeSummary {
        stationary: model.stationary().weights().iter().copied().collect(),
        drift: loaded.drift.clone(),
        ip,
        subgenerator_irreducible,
        moment_bounds: [moment_bound(model, 2), moment_bound(model, 3)],
        deterministic_gap: gap,
        monte_carlo: mc.ok(),
    };
    Ok(Report {
        command: "analyze".into(),
        model: loaded.meta.clone(),
        config_hash: model_hash(loaded, "analyze", seed),
        seed,
        results,
        summary,
        checks,
    })
}

/// Hash for model-only commands: the model file plus command and seed.
fn model_hash(loaded: &LoadedModel, command: &str, seed: SeedSpec) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(seed.master_seed.to_le_bytes());
    h.update(seed.stream_index.to_le_bytes());
    h.update(loaded.meta.sha256.as_bytes());
    hex::encode(h.finalize())
}

/// Largest `|a - b| / se` over entries; a zero SE counts only if the entries differ.
fn max_z(a: &DMatrix<f64>, b: &DMatrix<f64>, se: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let diff = (a[(i, j)] - b[(i, j)]).abs();
            let z = if se[i][j] > 0.0 {
                diff / se[i][j]
            } else if diff <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}

// ---------------------------------------------------------------- CLT

#[derive(Debug, Clone, Serialize)]
pub struct CltRecord {
    pub config_hash: String,
    pub t: f64,
    pub estimate: CovarianceEstimate,
    pub exact_mean: Vec<f64>,
    /// Largest `|Σ̂ - Σ| / SE` against either deterministic Σ.
    pub max_z_covariance: f64,
    pub max_z_mean: f64,
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltSummary {
    pub sigma_exact: Vec<Vec<f64>>,
    pub sigma_spectral: Option<Vec<Vec<f64>>>,
    pub deterministic_gap: Option<f64>,
}

pub fn run_clt(setup: &Setup) -> Result<Report<CltRecord, CltSummary>> {
    let model = &setup.loaded.model;
    let ip = ip_status(model)?;
    if !ip.holds() {
        return Err(Error::Invalid(format!(
            "model fails the irreducibility/aperiodicity check (irreducible {}, aperiodic {:?})",
            ip.irreducible, ip.aperiodic
        )));
    }
    let exact = model.exact_covariance()?;
    let spectral = spectral_covariance(model).ok();
    let k = setup.config.thresholds.se_multiple;
    let records: Vec<CltRecord> = setup
        .config
        .t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let samples = sample_paths(model, setup.start(), t, setup.config.samples, setup.config.seed.fork(i as u64))?;
            let estimate = empirical_covariance(&samples, t)?;
            let exact_mean = exact_scaled_mean(model, setup.start(), t)?;
            let sigma_hat = estimate.matrix();
            let mut flagged = Vec::new();
            let mut max_z_covariance = 0.0f64;
            for (name, sigma) in [("exact", Some(&exact)), ("spectral", spectral.as_ref())] {
                let Some(sigma) = sigma else { continue };
                let d = sigma.dim();
                for a in 0..d {
                    for b in a..d {
                        let z = max_z(
                            &DMatrix::from_element(1, 1, sigma.get(a, b)),
                            &DMatrix::from_element(1, 1, sigma_hat[(a, b)]),
                            &[vec![estimate.covariance_se[a][b]]],
                        );
                        max_z_covariance = max_z_covariance.max(z);
                        if z > k {
                            flagged.push(format!("sigma[{},{}] vs {name}: {z:.2} SE", a + 1, b + 1));
                        }
                    }
                }
            }
            let mut max_z_mean = 0.0f64;
            for (j, (m, e)) in estimate.mean.iter().zip(&exact_mean).enumerate() {
                let se = estimate.mean_se[j];
                let z = if se > 0.0 { (m - e).abs() / se } else if (m - e).abs() <= 1e-12 { 0.0 } else { f64::INFINITY };
                max_z_mean = max_z_mean.max(z);
                if z > k {
                    flagged.push(format!("mean[{}]: {z:.2} SE", j + 1));
                }
            }
            Ok(CltRecord {
                config_hash: setup.config_hash.clone(),
                t,
                estimate,
                exact_mean,
                max_z_covariance,
                max_z_mean,
                flagged,
            })
        })
        .collect::<Result<_>>()?;

    let gap = spectral.as_ref().map(|s| relative_gap(exact.entries(), s.entries()));
    let mut checks: Vec<Check> = records
        .iter()
        .map(|r| {
            Check::new(
                format!("t = {}: moments within {k} SE", r.t),
                r.flagged.is_empty(),
                if r.flagged.is_empty() {
                    format!("max z covariance {:.2}, mean {:.2}", r.max_z_covariance, r.max_z_mean)
                } else {
                    r.flagged.join("; ")
                },
            )
        })
        .collect();
    checks.push(Check::new(
        "deterministic covariance routes agree",
        gap.is_some_and(|g| g <= ROUTE_AGREEMENT),
        format!("relative gap {gap:?}"),
    ));
    let summary = CltSummary {
        sigma_exact: rows(exact.entries()),
        sigma_spectral: spectral.as_ref().map(|s| rows(s.entries())),
        deterministic_gap: gap,
    };
    Ok(setup.report("verify-clt", records, summary, checks))
}

// ---------------------------------------------------------------- CF rate

/// `max_{‖ζ‖ ≤ R} |φ_{k,t}(t^{-1/2}ζ) - exp(-⟨ζ,Σζ⟩/2)|` over the grid, with the maximiser.
pub fn cf_sup_error(
    model: &MapModel<f64>,
    sigma: &CovarianceMatrix<f64>,
    k: usize,
    t: f64,
    zeta: &ZetaGrid,
) -> Result<(f64, Vec<f64>)> {
    let pts = grid_points(model.dim(), zeta.step, 0.0, zeta.radius);
    let s = sigma.entries();
    let scale = t.sqrt().recip();
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|z| {
            let scaled: Vec<f64> = z.iter().map(|v| v * scale).collect();
            let phi = characteristic_function(model, k, t, &scaled)?;
            let zv = DVector::from_column_slice(z);
            let q = (zv.transpose() * s * &zv)[(0, 0)];
            Ok((phi - num_complex::Complex::new((-0.5 * q).exp(), 0.0)).norm())
        })
        .collect::<Result<_>>()?;
    let (idx, best) = errs.iter().enumerate().fold((0, 0.0f64), |acc, (i, e)| if *e > acc.1 { (i, *e) } else { acc });
    Ok((best, pts.get(idx).cloned().unwrap_or_default()))
}

#[derive(Debug, Clone, Serialize)]
pub struct CfRecord {
    pub config_hash: String,
    pub t: f64,
    pub sup_error_cf: f64,
    pub argmax: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CfSummary {
    pub sigma: Vec<Vec<f64>>,
    pub lattice_max_radius: f64,
    pub lattice_points_scanned: usize,
    pub rate: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_error: Option<String>,
}

pub fn run_cf_rate(setup: &Setup) -> Result<Report<CfRecord, CfSummary>> {
    let model = &setup.loaded.model;
    let lattice = lattice_scan(model, setup.config.lattice.radius, setup.config.lattice.step)?;
    if lattice.is_lattice_suspected {
        return Err(Error::LatticeDetected { tau: lattice.max_radius });
    }
    let sigma = model.exact_covariance()?;
    let records: Vec<CfRecord> = setup
        .config
        .t_grid
        .iter()
        .map(|&t| {
            let (e, argmax) = cf_sup_error(model, &sigma, setup.start(), t, &setup.config.zeta)?;
            Ok(CfRecord { config_hash: setup.config_hash.clone(), t, sup_error_cf: e, argmax })
        })
        .collect::<Result<_>>()?;
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let es: Vec<f64> = records.iter().map(|r| r.sup_error_cf).collect();
    let fit = fit_rate(&ts, &es);
    let th = setup.config.thresholds;
    let checks = vec![match &fit {
        Ok(f) => Check::new(
            "cf error rate",
            f.slope_in(th.slope_min, th.slope_max) && f.r_squared >= th.min_r_squared,
            format!(
                "slope {:.4} (band [{}, {}]), r² {:.4} (min {})",
                f.slope, th.slope_min, th.slope_max, f.r_squared, th.min_r_squared
            ),
        ),
        Err(e) => Check::new("cf error rate", false, e.to_string()),
    }];
    let summary = CfSummary {
        sigma: rows(sigma.entries()),
        lattice_max_radius: lattice.max_radius,
        lattice_points_scanned: lattice.points_scanned,
        rate: fit.as_ref().ok().copied(),
        rate_error: fit.err().map(|e| e.to_string()),
    };
    Ok(setup.report("cf-rate", records, summary, checks))
}

// ---------------------------------------------------------------- density LLT

/// `sup` of `η_Σ` outside the scaled region `t^{-1/2} D_t`.
///
/// The complement is the union of the half-spaces beyond each face, and over
/// `⟨a, y⟩ ≥ b` the smallest `⟨y, Σ⁻¹y⟩` is `b² / ⟨a, Σa⟩`.
pub fn boundary_term(model: &LocalTimeMapModel<f64>, t: f64) -> Result<f64> {
    let sigma = markov::local_time_covariance(model.generator())?;
    sigma.require_positive_definite()?;
    let region = region_dt(model, t)?.scaled(t.sqrt().recip());
    let s = sigma.entries();
    let min_sq = region
        .faces()
        .iter()
        .map(|f| {
            let a = DVector::from_column_slice(&f.normal);
            let var = (a.transpose() * s * &a)[(0, 0)];
            f.offset * f.offset / var
        })
        .fold(f64::INFINITY, f64::min);
    Ok(gaussian_peak(&sigma) * (-0.5 * min_sq).exp())
}

fn gaussian_peak(sigma: &CovarianceMatrix<f64>) -> f64 {
    (2.0 * std::f64::consts::PI).powf(-(sigma.dim() as f64) / 2.0) / sigma.determinant().sqrt()
}

/// `sup η_Σ` outside the `±5σ_j` box of [`Grid::standard`].
pub fn grid_tail_bound(sigma: &CovarianceMatrix<f64>) -> f64 {
    gaussian_peak(sigma) * (-12.5f64).exp()
}

pub const BANDWIDTH_SWEEP: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub scale: f64,
    pub bandwidth: Vec<f64>,
    pub sup_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LltRecord {
    pub config_hash: String,
    pub t: f64,
    pub sample_count: usize,
    pub bandwidth: Vec<f64>,
    pub sup_error_density: f64,
    pub argmax: Vec<f64>,
    pub sup_error_cf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_term: Option<f64>,
    pub kde_mass: f64,
    pub bandwidth_sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseFloor {
    pub sample_count: usize,
    pub bandwidth: Vec<f64>,
    pub sup_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LltSummary {
    pub sigma: Vec<Vec<f64>>,
    pub grid: Grid,
    pub grid_tail_bound: f64,
    pub noise_floor: NoiseFloor,
    pub rate_density: Option<RateFit>,
    pub rate_cf: Option<RateFit>,
    /// Whether the sup error decreases strictly at each sweep scale.
    pub sweep_decreasing: Vec<(f64, bool)>,
}

fn bandwidth_for(policy: &BandwidthPolicy, values: &[f64], dim: usize) -> Result<Vec<f64>> {
    match policy {
        BandwidthPolicy::Silverman { scale } => Ok(silverman_bandwidth(values, dim).iter().map(|h| h * scale).collect()),
        BandwidthPolicy::Fixed { value } if value.len() == dim => Ok(value.clone()),
        BandwidthPolicy::Fixed { value } => Err(Error::config(
            "bandwidth.value",
            format!("needs {dim} entries, got {}", value.len()),
        )),
    }
}

/// Sup error of a KDE of `values` against `η` on `grid`, with the argmax.
fn density_error(values: &[f64], dim: usize, grid: &Grid, h: &[f64], eta: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let est = kde_density(values, dim, grid, h)?;
    let (idx, err) = est
        .values
        .iter()
        .zip(eta)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    Ok((err, grid.point(idx), est.mass()))
}

/// Sup-norm error of the KDE of a synthetic `N(0, Σ)` sample.
pub fn noise_floor(
    sigma: &CovarianceMatrix<f64>,
    count: usize,
    policy: &BandwidthPolicy,
    seed: SeedSpec,
) -> Result<NoiseFloor> {
    let grid = Grid::standard(sigma);
    let eta = gaussian_density(sigma, &grid)?;
    let control = gaussian_samples(sigma, count, seed)?;
    let h = bandwidth_for(policy, &control.values, sigma.dim())?;
    let (sup_error, _, _) = density_error(&control.values, sigma.dim(), &grid, &h, &eta)?;
    Ok(NoiseFloor { sample_count: count, bandwidth: h, sup_error })
}

pub fn run_llt_density(setup: &Setup) -> Result<Report<LltRecord, LltSummary>> {
    let model = &setup.loaded.model;
    let d = model.dim();
    if !(d == 1 || d == 2) {
        return Err(Error::Invalid(format!("density experiments need dimension 1 or 2, got {d}")));
    }
    let sigma = model.exact_covariance()?;
    sigma.require_positive_definite()?;
    let grid = Grid::standard(&sigma);
    let eta = gaussian_density(&sigma, &grid)?;
    let cfg = &setup.config;
    let records: Vec<LltRecord> = cfg
        .t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let samples = sample_paths(model, setup.start(), t, cfg.samples, cfg.seed.fork(i as u64))?;
            let scaled = samples.scaled_values();
            let h = bandwidth_for(&cfg.bandwidth, &scaled, d)?;
            let bandwidth_sweep: Vec<SweepPoint> = BANDWIDTH_SWEEP
                .iter()
                .map(|&c| {
                    let hc: Vec<f64> = h.iter().map(|v| v * c).collect();
                    let (e, _, _) = density_error(&scaled, d, &grid, &hc, &eta)?;
                    Ok(SweepPoint { scale: c, bandwidth: hc, sup_error: e })
                })
                .collect::<Result<_>>()?;
            let (sup_error_density, argmax, kde_mass) = density_error(&scaled, d, &grid, &h, &eta)?;
            let (sup_error_cf, _) = cf_sup_error(model, &sigma, setup.start(), t, &cfg.zeta)?;
            let boundary = match model {
                MapModel::LocalTime(m) => Some(boundary_term(m, t)?),
                MapModel::Discrete(_) => None,
            };
            Ok(LltRecord {
                config_hash: setup.config_hash.clone(),
                t,
                sample_count: samples.len(),
                bandwidth: h,
                sup_error_density,
                argmax,
                sup_error_cf,
                boundary_term: boundary,
                kde_mass,
                bandwidth_sweep,
            })
        })
        .collect::<Result<_>>()?;
    let floor = noise_floor(&sigma, cfg.samples, &cfg.bandwidth, cfg.seed.fork(CONTROL_STREAM))?;

    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let dens: Vec<f64> = records.iter().map(|r| r.sup_error_density).collect();
    let cfs: Vec<f64> = records.iter().map(|r| r.sup_error_cf).collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let sweep_decreasing = BANDWIDTH_SWEEP
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let series: Vec<f64> = records.iter().map(|r| r.bandwidth_sweep[j].sup_error).collect();
            (c, decreasing(&series))
        })
        .collect();

    let th = cfg.thresholds;
    let last = *dens.last().expect("t_grid is non-empty");
    let mut checks = vec![
        Check::new("density sup error strictly decreasing", decreasing(&dens), format!("{dens:?}")),
        Check::new(
            "final density sup error",
            last < th.final_sup_error,
            format!("{last:.5} at t = {}, limit {}", ts[ts.len() - 1], th.final_sup_error),
        ),
        Check::new(
            "KDE noise floor",
            floor.sup_error < th.noise_floor,
            format!("{:.5} with {} Gaussian samples, limit {}", floor.sup_error, floor.sample_count, th.noise_floor),
        ),
    ];
    if records.iter().all(|r| r.boundary_term.is_some()) {
        let worst = records.iter().filter_map(|r| r.boundary_term).fold(0.0, f64::max);
        checks.push(Check::new(
            "boundary term below density tolerance",
            worst <= th.final_sup_error,
            format!("largest boundary term {worst:.3e}"),
        ));
    }
    let summary = LltSummary {
        sigma: rows(sigma.entries()),
        grid_tail_bound: grid_tail_bound(&sigma),
        grid,
        noise_floor: floor,
        rate_density: fit_rate(&ts, &dens).ok(),
        rate_cf: fit_rate(&ts, &cfs).ok(),
        sweep_decreasing,
    };
    Ok(setup.report("verify-llt", records, summary, checks))
}

// ---------------------------------------------------------------- lattice scan and spectral summary

pub fn run_lattice_scan(loaded: &LoadedModel, grid: &LatticeGrid) -> Result<Report<LatticeScan, ()>> {
    let scan = lattice_scan(&loaded.model, grid.radius, grid.step)?;
    let seed = SeedSpec::new(0, 0);
    Ok(Report {
        command: "scan-lattice".into(),
        model: loaded.meta.clone(),
        config_hash: model_hash(loaded, "scan-lattice", seed),
        seed,
        results: vec![scan],
        summary: (),
        checks: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaPoint {
    /// `ζ = s·e₁`.
    pub s: f64,
    pub lambda: Option<[f64; 2]>,
    pub modulus: Option<f64>,
    pub second_modulus: Option<f64>,
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnulusOutcome {
    Decay(AnnulusDecay),
    LatticeDetected { tau: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub sigma_spectral: Option<Vec<Vec<f64>>>,
    pub delta: f64,
    pub outer: f64,
    pub annulus: AnnulusOutcome,
}

pub const ANNULUS_DELTA: f64 = 0.5;
pub const ANNULUS_OUTER: f64 = 3.0;
pub const ANNULUS_TAU_MAX: f64 = 1.0 - 1e-3;
pub const ANNULUS_MIN_R_SQUARED: f64 = 0.99;

pub fn annulus_t_grid() -> Vec<f64> {
    (1..=10).map(|i| 5.0 * i as f64).collect()
}

/// Annulus grid step: fine in 1D, coarser as the dimension grows.
pub fn annulus_step(dim: usize) -> f64 {
    match dim {
        1 => 0.05,
        2 => 0.1,
        _ => 0.25,
    }
}

/// Dominant eigenvalue along `ζ = s·e₁`, spectral gap and annulus decay.
pub fn spectral_summary(loaded: &LoadedModel) -> Result<Report<LambdaPoint, SpectralSummary>> {
    let model = &loaded.model;
    let d = model.dim();
    let curve: Vec<LambdaPoint> = (0..=80)
        .map(|i| {
            let s = 0.05 * i as f64;
            let mut zeta = vec![0.0; d];
            zeta[0] = s;
            match fourier_matrix(model, 1.0, &zeta).and_then(|f| dominant_eigen(&f)) {
                Ok(e) => LambdaPoint {
                    s,
                    lambda: Some([e.lambda.re, e.lambda.im]),
                    modulus: Some(e.lambda.norm()),
                    second_modulus: Some(e.second_modulus),
                    gap: Some(e.gap),
                    error: None,
                },
                Err(err) => LambdaPoint {
                    s,
                    lambda: None,
                    modulus: None,
                    second_modulus: None,
                    gap: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let annulus =
        match annulus_decay(model, 0, ANNULUS_DELTA, ANNULUS_OUTER, &annulus_t_grid(), annulus_step(d)) {
            Ok(a) => AnnulusOutcome::Decay(a),
            Err(Error::LatticeDetected { tau }) => AnnulusOutcome::LatticeDetected { tau },
            Err(e) => return Err(e),
        };
    let checks = vec![match &annulus {
        AnnulusOutcome::Decay(a) => Check::new(
            "annulus decay",
            a.tau_hat < ANNULUS_TAU_MAX && a.r_squared >= ANNULUS_MIN_R_SQUARED,
            format!("tau {:.6}, r² {:.5}", a.tau_hat, a.r_squared),
        ),
        AnnulusOutcome::LatticeDetected { tau } => {
            Check::new("annulus decay", false, format!("lattice detected, fitted tau {tau:.6}"))
        }
    }];
    let seed = SeedSpec::new(0, 0);
    Ok(Report {
        command: "spectral".into(),
        model: loaded.meta.clone(),
        config_hash: model_hash(loaded, "spectral", seed),
        seed,
        results: curve,
        summary: SpectralSummary {
            sigma_spectral: spectral_covariance(model).ok().map(|s| rows(s.entries())),
            delta: ANNULUS_DELTA,
            outer: ANNULUS_OUTER,
            annulus,
        },
        checks,
    })
}

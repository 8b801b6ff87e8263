//! Acceptance suite. Each test prints one `[acceptance]` line with its
//! measurements and then asserts.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use mapllt::harness::{
    boundary_term, load_model, run_cf_rate, run_llt_density, ExperimentConfig, LoadedModel, Purpose, Setup,
};
use mapllt::markov::{self, local_time_covariance, ChainSpec, Generator};
use mapllt::model::MapModel;
use mapllt::simulate::{empirical_covariance, kde_density, local_time_vectors, silverman_bandwidth, Grid, SeedSpec};
use mapllt::spectral::{annulus_decay, dominant_eigenvalue, eigenvalue_power_defect, semigroup_residual, spectral_covariance};
use mapllt::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODELS: [&str; 6] =
    ["two_state_symmetric", "two_state_asymmetric", "three_state", "iid_gaussian", "markov_gaussian", "lattice_point_mass"];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn model(name: &str) -> LoadedModel {
    load_model(&root().join("models").join(format!("{name}.toml"))).unwrap()
}

fn setup(config: &str, purpose: Purpose) -> Setup {
    let cfg = ExperimentConfig::load(&root().join("configs").join(format!("{config}.toml"))).unwrap();
    Setup::new(cfg, purpose).unwrap()
}

/// Prints the verdict line outside libtest's capture, then asserts.
fn verdict(criterion: &str, passed: bool, detail: String) {
    let line = format!("[acceptance] criterion {criterion} {}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(passed, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_sigma_three_routes() {
    let start = Instant::now();
    let g = Generator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let loaded = model("two_state_symmetric");
    let pinsky = local_time_covariance(&g).unwrap().get(0, 0);
    let spectral = spectral_covariance(&loaded.model).unwrap().get(0, 0);
    let MapModel::LocalTime(m) = &loaded.model else { unreachable!() };
    let samples = mapllt::simulate::simulate_ctmc_local_times(m, 0, 200.0, 100_000, SeedSpec::new(20240611, 1)).unwrap();
    let est = empirical_covariance(&samples, 200.0).unwrap();
    let (mc, se) = (est.covariance[0][0], est.covariance_se[0][0]);
    let elapsed = start.elapsed();
    let rel = (pinsky - spectral).abs() / pinsky;
    let passed = rel <= 1e-4
        && (pinsky - 0.25).abs() <= 1e-4
        && (spectral - 0.25).abs() <= 1e-4
        && (mc - pinsky).abs() <= 3.0 * se
        && elapsed < Duration::from_secs(30);
    verdict(
        "1",
        passed,
        format!(
            "deviation {pinsky:.10}, spectral {spectral:.10} (rel {rel:.2e}), Monte Carlo {mc:.5} ± {se:.5} ({:.2} SE), {:.2}s",
            (mc - pinsky).abs() / se,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_semigroup_residuals() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_model = "";
    for name in MODELS {
        let m = model(name).model;
        for _ in 0..100 {
            let (t, s) = if m.is_discrete() {
                (rng.random_range(1..=20) as f64, rng.random_range(1..=20) as f64)
            } else {
                (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0))
            };
            let zeta: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-4.0..4.0)).collect();
            let r = semigroup_residual(&m, t, s, &zeta).unwrap();
            if r > worst {
                worst = r;
                worst_model = name;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "2",
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max residual {worst:.3e} ({worst_model}) over 100 draws x {} models, {:.2}s", MODELS.len(), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_3_eigenvalue_power_defect() {
    let start = Instant::now();
    let m = model("iid_gaussian").model;
    let sigma = m.exact_covariance().unwrap();
    // λ(ζ) = exp(-ζ²/2) cos ζ for this model.
    let closed = |z: f64| (-0.5 * z * z).exp() * z.cos();
    let mut lambda_err = 0.0f64;
    for z in [0.01, 0.1, 0.25, 0.5, 1.0] {
        lambda_err = lambda_err.max((dominant_eigenvalue(&m, &[z]).unwrap() - closed(z)).norm());
    }
    let ts: Vec<f64> = (4..=12).map(|k| 2f64.powi(k)).collect();
    let scaled: Vec<f64> =
        ts.iter().map(|&t| t.sqrt() * eigenvalue_power_defect(&m, &sigma, &[1.0], t).unwrap()).collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let elapsed = start.elapsed();
    verdict(
        "3",
        hi / lo <= 50.0 && lo > 0.0 && lambda_err < 1e-12 && elapsed < Duration::from_secs(1),
        format!(
            "t^(1/2)·defect in [{lo:.4e}, {hi:.4e}], ratio {:.2} (limit 50); |λ - closed form| {lambda_err:.1e}; {:.3}s",
            hi / lo,
            elapsed.as_secs_f64()
        ),
    );
}

fn cf_rate_criterion(id: &str, config: &str) {
    let start = Instant::now();
    let s = setup(config, Purpose::CfRate);
    let report = run_cf_rate(&s).unwrap();
    let fit = report.summary.rate.expect("rate fit");
    let elapsed = start.elapsed();
    verdict(
        id,
        fit.slope_in(-0.65, -0.35) && fit.r_squared >= 0.95 && elapsed < Duration::from_secs(60),
        format!(
            "{}: slope {:.4} (CI [{:.4}, {:.4}], band [-0.65, -0.35]), r² {:.5}, {:.2}s",
            report.model.name,
            fit.slope,
            fit.slope_ci[0],
            fit.slope_ci[1],
            fit.r_squared,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4a_cf_rate_iid_gaussian() {
    cf_rate_criterion("4(a)", "cf_rate_iid_gaussian");
}

#[test]
fn criterion_4b_cf_rate_two_state_symmetric() {
    cf_rate_criterion("4(b)", "cf_rate_symmetric");
}

#[test]
fn criterion_5_annulus_decay() {
    let start = Instant::now();
    let ts: Vec<f64> = (1..=10).map(|i| 5.0 * i as f64).collect();
    let mut notes = Vec::new();
    let mut passed = true;
    for name in ["iid_gaussian", "two_state_symmetric"] {
        let a = annulus_decay(&model(name).model, 0, 0.5, 3.0, &ts, 0.05).unwrap();
        passed &= a.tau_hat < 1.0 - 1e-3 && a.r_squared >= 0.99;
        notes.push(format!("{name} tau {:.6} r² {:.5}", a.tau_hat, a.r_squared));
    }
    let lattice = annulus_decay(&model("lattice_point_mass").model, 0, 0.5, 3.0, &ts, 0.05);
    let detected = matches!(lattice, Err(Error::LatticeDetected { .. }));
    passed &= detected;
    notes.push(format!("lattice_point_mass LatticeDetected: {detected}"));
    let elapsed = start.elapsed();
    passed &= elapsed < Duration::from_secs(30);
    verdict("5", passed, format!("{}; {:.2}s", notes.join("; "), elapsed.as_secs_f64()));
}

#[test]
fn criterion_6_density_llt() {
    let start = Instant::now();
    let s = setup("llt_symmetric", Purpose::Density);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let report = pool.install(|| run_llt_density(&s)).unwrap();
    let elapsed = start.elapsed();
    let errs: Vec<f64> = report.results.iter().map(|r| r.sup_error_density).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let last = *errs.last().unwrap();
    let floor = report.summary.noise_floor.sup_error;
    verdict(
        "6",
        report.results.iter().map(|r| r.t).eq([25.0, 100.0, 400.0])
            && report.results.iter().all(|r| r.sample_count == 1_000_000)
            && decreasing
            && last < 0.05
            && floor < 0.01
            && elapsed < Duration::from_secs(600),
        format!(
            "sup errors {errs:.5?} (strictly decreasing: {decreasing}), final {last:.5} < 0.05, noise floor {floor:.5} < 0.01, {:.1}s on 1 thread",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_boundary_term() {
    let start = Instant::now();
    let MapModel::LocalTime(m) = model("two_state_symmetric").model else { unreachable!() };
    let terms: Vec<f64> = [25.0, 100.0, 400.0].iter().map(|&t| boundary_term(&m, t).unwrap()).collect();
    let nonincreasing = terms.windows(2).all(|w| w[1] <= w[0]);
    let small = terms.iter().all(|b| *b < 1e-8);
    let elapsed = start.elapsed();
    verdict(
        "7",
        small && nonincreasing && elapsed < Duration::from_secs(1),
        format!(
            "terms at t = 25, 100, 400: [{}]; all < 1e-8: {small}; nonincreasing: {nonincreasing}",
            terms.iter().map(|b| format!("{b:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

#[test]
fn criterion_8_structural_invariants() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut fail = |name: &str, what: String| failures.push(format!("{name}: {what}"));
    for name in MODELS {
        let loaded = model(name);
        let m = &loaded.model;
        let n = m.n();
        let pi = m.stationary().weights().clone();

        // Transition matrices over several horizons are stochastic.
        let horizons: &[f64] = if m.is_discrete() { &[1.0, 7.0, 50.0] } else { &[0.1, 1.0, 10.0] };
        for &t in horizons {
            let p = m.transition(t).unwrap();
            for i in 0..n {
                let row: f64 = p.row(i).sum();
                if (row - 1.0).abs() > 1e-12 || p.row(i).iter().any(|v| *v < 0.0) {
                    fail(name, format!("transition over {t} is not stochastic (row {i} sums to {row})"));
                }
            }
        }

        // π is invariant and normalised.
        if (pi.sum() - 1.0).abs() > 1e-12 {
            fail(name, format!("π sums to {}", pi.sum()));
        }
        let (lhs, scale) = match m.chain() {
            ChainSpec::Discrete(p) => (pi.transpose() * p.entries() - pi.transpose(), 1.0),
            ChainSpec::Continuous(g) => {
                let s = (0..n).map(|i| g.exit_rate(i)).fold(0.0, f64::max);
                (pi.transpose() * g.entries(), s)
            }
        };
        if lhs.amax() > 1e-12 * scale {
            fail(name, format!("π is not invariant (residual {:.2e})", lhs.amax()));
        }

        // Deviation matrix: D1 = 0 and πD = 0.
        let d = match m {
            MapModel::LocalTime(lt) => markov::deviation_matrix(lt.generator()).unwrap().entries().clone(),
            MapModel::Discrete(dm) => {
                let z = markov::fundamental_matrix(dm.transition(), dm.stationary()).unwrap();
                z - dm.stationary().projector()
            }
        };
        let ones = nalgebra::DVector::from_element(n, 1.0);
        let (right, left) = ((&d * &ones).amax(), (pi.transpose() * &d).amax());
        if right > 1e-10 || left > 1e-10 {
            fail(name, format!("deviation null vectors: |D1| {right:.2e}, |πD| {left:.2e}"));
        }

        // Local times add up to t.
        if let MapModel::LocalTime(lt) = m {
            let t = 37.5;
            let raw = local_time_vectors(lt, 0, t, 20_000, SeedSpec::new(8, 0)).unwrap();
            let worst = raw.values.chunks(n).map(|r| (r.iter().sum::<f64>() - t).abs()).fold(0.0, f64::max);
            if worst > 1e-9 * t {
                fail(name, format!("local times miss t by {worst:.2e}"));
            }
        }

        // KDE mass on the standard grid.
        let sigma = m.exact_covariance().unwrap();
        if sigma.is_positive_definite() && m.dim() <= 2 {
            let t = 100.0;
            let samples = mapllt::harness::experiments::sample_paths(m, 0, t, 20_000, SeedSpec::new(8, 1)).unwrap();
            let scaled = samples.scaled_values();
            let h = silverman_bandwidth(&scaled, m.dim());
            let mass = kde_density(&scaled, m.dim(), &Grid::standard(&sigma), &h).unwrap().mass();
            if !(0.99..=1.001).contains(&mass) {
                fail(name, format!("KDE mass {mass:.6} outside [0.99, 1.001]"));
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed < Duration::from_secs(30);
    let detail = if failures.is_empty() {
        format!("all invariants hold on {} bundled models, {:.2}s", MODELS.len(), elapsed.as_secs_f64())
    } else {
        failures.join("; ")
    };
    verdict("8", passed, detail);
}

//! `mapllt`: covariance, spectral and limit-theorem experiments for Markov
//! additive processes.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 when `--strict`
//! is set and an acceptance check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mapllt::harness::{
    self, load_model, write_series, ExperimentConfig, LatticeGrid, Purpose, Report, SeriesPoint, Setup,
};
use mapllt::simulate::SeedSpec;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mapllt", version, about = "Limit theorem experiments for Markov additive processes")]
struct Cli {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Exit with status 2 if any acceptance check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Model file (TOML).
    model: PathBuf,
    /// Directory for the JSON report and CSV curves.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); same as --config.
    config_path: Option<PathBuf>,
    #[arg(long = "config")]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary law, Σ by three routes, irreducibility checks.
    Analyze {
        #[command(flatten)]
        args: ModelArgs,
        /// Seed of the Monte Carlo covariance route.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dominant eigenvalue curve, spectral gap and annulus decay.
    Spectral {
        #[command(flatten)]
        args: ModelArgs,
    },
    /// Searches for ζ ≠ 0 where the Fourier matrix has spectral radius 1.
    ScanLattice {
        #[command(flatten)]
        args: ModelArgs,
        #[arg(long, default_value_t = LatticeGrid::default().radius)]
        radius: f64,
        #[arg(long, default_value_t = LatticeGrid::default().step)]
        step: f64,
    },
    /// Monte Carlo covariance of t^{-1/2} Y_t against the exact Σ.
    VerifyClt(ConfigArgs),
    /// Kernel density estimate of t^{-1/2} Y_t against the Gaussian density.
    VerifyLlt(ConfigArgs),
    /// Rate of the characteristic function error (no simulation).
    CfRate(ConfigArgs),
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    seconds: f64,
    threads: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    };
    let started = Instant::now();
    match pool.install(|| run(&cli.command)) {
        Ok((name, passed, out)) => {
            if let Some(dir) = out {
                let timing = Timing { command: &name, seconds: started.elapsed().as_secs_f64(), threads: pool.current_num_threads() };
                let json = serde_json::to_string_pretty(&timing).expect("timing serializes");
                if let Err(e) = std::fs::write(dir.join("timing.json"), json + "\n") {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            if cli.strict && !passed {
                eprintln!("acceptance checks failed");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type Outcome = (String, bool, Option<PathBuf>);

fn run(command: &Command) -> mapllt::Result<Outcome> {
    match command {
        Command::Analyze { args, seed } => {
            let loaded = load_model(&args.model)?;
            let report = harness::analyze(&loaded, SeedSpec::new(*seed, 0))?;
            println!("model {} ({} states)", report.model.name, report.model.states);
            println!("stationary {:?}", report.summary.stationary);
            for r in &report.results {
                match (&r.sigma, &r.error) {
                    (Some(s), _) => println!("sigma [{}] = {s:?}", r.route),
                    (None, Some(e)) => println!("sigma [{}] failed: {e}", r.route),
                    _ => {}
                }
            }
            if let Some(sub) = &report.summary.subgenerator_irreducible {
                println!("sub-generators irreducible {sub:?}");
            }
            finish(&report, args.out.as_deref(), |_| Ok(()))
        }
        Command::Spectral { args } => {
            let loaded = load_model(&args.model)?;
            let report = harness::spectral_summary(&loaded)?;
            println!("model {}", report.model.name);
            if let Some(s) = &report.summary.sigma_spectral {
                println!("sigma [spectral] = {s:?}");
            }
            if let Some(p) = report.results.iter().find(|p| p.s == 1.0) {
                println!("at |zeta| = 1: |lambda| = {:?}, gap = {:?}", p.modulus, p.gap);
            }
            finish(&report, args.out.as_deref(), |dir| {
                let curve: Vec<SeriesPoint> = report
                    .results
                    .iter()
                    .filter_map(|p| p.modulus.map(|m| SeriesPoint { t: p.s, value: m, stderr: None }))
                    .collect();
                write_series(&dir.join("lambda_modulus.csv"), &curve)?;
                if let harness::experiments::AnnulusOutcome::Decay(a) = &report.summary.annulus {
                    let pts: Vec<SeriesPoint> = a
                        .t_grid
                        .iter()
                        .zip(&a.sup_values)
                        .map(|(t, v)| SeriesPoint { t: *t, value: *v, stderr: None })
                        .collect();
                    write_series(&dir.join("annulus_sup.csv"), &pts)?;
                }
                Ok(())
            })
        }
        Command::ScanLattice { args, radius, step } => {
            let loaded = load_model(&args.model)?;
            let report = harness::run_lattice_scan(&loaded, &LatticeGrid { radius: *radius, step: *step })?;
            let scan = &report.results[0];
            println!(
                "model {}: lattice {} (max spectral radius {:.9} over {} points, {} witnesses)",
                report.model.name,
                if scan.is_lattice_suspected { "suspected" } else { "clear" },
                scan.max_radius,
                scan.points_scanned,
                scan.witnesses.len()
            );
            if let Some(w) = scan.witnesses.first() {
                println!("first witness zeta = {w:?}");
            }
            finish(&report, args.out.as_deref(), |_| Ok(()))
        }
        Command::VerifyClt(args) => {
            let setup = setup(args, Purpose::Clt)?;
            let report = harness::run_clt(&setup)?;
            println!("sigma [exact] = {:?}", report.summary.sigma_exact);
            for r in &report.results {
                println!("t = {}: sigma_hat = {:?} (se {:?})", r.t, r.estimate.covariance, r.estimate.covariance_se);
            }
            finish(&report, setup.config.out.as_deref(), |dir| {
                let d = report.summary.sigma_exact.len();
                for i in 0..d {
                    for j in i..d {
                        let pts: Vec<SeriesPoint> = report
                            .results
                            .iter()
                            .map(|r| SeriesPoint {
                                t: r.t,
                                value: r.estimate.covariance[i][j],
                                stderr: Some(r.estimate.covariance_se[i][j]),
                            })
                            .collect();
                        write_series(&dir.join(format!("covariance_{}{}.csv", i + 1, j + 1)), &pts)?;
                    }
                }
                Ok(())
            })
        }
        Command::VerifyLlt(args) => {
            let setup = setup(args, Purpose::Density)?;
            let report = harness::run_llt_density(&setup)?;
            for r in &report.results {
                println!(
                    "t = {}: sup density error {:.5}, sup cf error {:.5}, boundary term {:.3e}",
                    r.t,
                    r.sup_error_density,
                    r.sup_error_cf,
                    r.boundary_term.unwrap_or(f64::NAN)
                );
            }
            println!("KDE noise floor {:.5}", report.summary.noise_floor.sup_error);
            finish(&report, setup.config.out.as_deref(), |dir| {
                let series = |f: &dyn Fn(&harness::experiments::LltRecord) -> Option<f64>| -> Vec<SeriesPoint> {
                    report.results.iter().filter_map(|r| f(r).map(|v| SeriesPoint { t: r.t, value: v, stderr: None })).collect()
                };
                write_series(&dir.join("sup_error_density.csv"), &series(&|r| Some(r.sup_error_density)))?;
                write_series(&dir.join("sup_error_cf.csv"), &series(&|r| Some(r.sup_error_cf)))?;
                let boundary = series(&|r| r.boundary_term);
                if !boundary.is_empty() {
                    write_series(&dir.join("boundary_term.csv"), &boundary)?;
                }
                for (j, c) in harness::experiments::BANDWIDTH_SWEEP.iter().enumerate() {
                    write_series(
                        &dir.join(format!("sup_error_bandwidth_x{c}.csv")),
                        &series(&|r| Some(r.bandwidth_sweep[j].sup_error)),
                    )?;
                }
                Ok(())
            })
        }
        Command::CfRate(args) => {
            let setup = setup(args, Purpose::CfRate)?;
            let report = harness::run_cf_rate(&setup)?;
            for r in &report.results {
                println!("t = {}: sup cf error {:.6e}", r.t, r.sup_error_cf);
            }
            if let Some(f) = &report.summary.rate {
                println!("slope {:.4} [{:.4}, {:.4}], r² {:.4}", f.slope, f.slope_ci[0], f.slope_ci[1], f.r_squared);
            }
            finish(&report, setup.config.out.as_deref(), |dir| {
                let pts: Vec<SeriesPoint> =
                    report.results.iter().map(|r| SeriesPoint { t: r.t, value: r.sup_error_cf, stderr: None }).collect();
                write_series(&dir.join("sup_error_cf.csv"), &pts)
            })
        }
    }
}

fn setup(args: &ConfigArgs, purpose: Purpose) -> mapllt::Result<Setup> {
    let path = match (&args.config_path, &args.config) {
        (Some(p), None) | (None, Some(p)) => p,
        (Some(_), Some(_)) => {
            return Err(mapllt::Error::Invalid("give the config either positionally or with --config, not both".into()))
        }
        (None, None) => return Err(mapllt::Error::Invalid("missing config file".into())),
    };
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = args.seed {
        config.seed.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    Setup::new(config, purpose)
}

/// Prints the checks and writes the report plus sidecars when `out` is set.
fn finish<R: Serialize, S: Serialize>(
    report: &Report<R, S>,
    out: Option<&Path>,
    sidecars: impl FnOnce(&Path) -> mapllt::Result<()>,
) -> mapllt::Result<Outcome> {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = out {
        let path = report.write(dir)?;
        sidecars(dir)?;
        println!("wrote {}", path.display());
    }
    Ok((report.command.clone(), report.passed(), out.map(Path::to_path_buf)))
}

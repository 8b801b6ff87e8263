//! Experiment orchestration: model and config files, the CLT, characteristic
//! function and density experiments, rate fits and report output.

pub mod config;
pub mod experiments;
pub mod modelfile;
pub mod rate;
pub mod report;

pub use config::{BandwidthPolicy, ExperimentConfig, LatticeGrid, Purpose, Thresholds, ZetaGrid};
pub use experiments::{
    analyze, boundary_term, cf_sup_error, noise_floor, run_cf_rate, run_clt, run_lattice_scan, run_llt_density,
    spectral_summary, Setup,
};
pub use modelfile::{load_model, parse_model, ChainKind, LoadedModel, ModelMeta};
pub use rate::{fit_rate, RateFit};
pub use report::{write_series, Check, Report, SeriesPoint};

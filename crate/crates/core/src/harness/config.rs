//! Experiment configuration files (TOML).
//!
//! ```toml
//! model = "../models/two_state_symmetric.toml"   # relative to this file
//! start_state = 1
//! t_grid = [25.0, 100.0, 400.0]
//! samples = 1000000
//! out = "../out/llt_symmetric"
//!
//! [seed]
//! master_seed = 20240611
//! stream_index = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulate::SeedSpec;

/// Minimum sample count for density experiments.
pub const MIN_DENSITY_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaGrid {
    pub radius: f64,
    pub step: f64,
}

impl Default for ZetaGrid {
    fn default() -> Self {
        Self { radius: 4.0, step: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeGrid {
    pub radius: f64,
    pub step: f64,
}

impl Default for LatticeGrid {
    fn default() -> Self {
        Self { radius: 8.0, step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthPolicy {
    /// Silverman's rule times `scale`.
    Silverman { scale: f64 },
    /// One bandwidth per axis, in units of `t^{-1/2} Y_t`.
    Fixed { value: Vec<f64> },
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::Silverman { scale: 1.0 }
    }
}

/// Pass/fail thresholds checked by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub slope_min: f64,
    pub slope_max: f64,
    pub min_r_squared: f64,
    /// Largest acceptable density sup error at the last horizon.
    pub final_sup_error: f64,
    /// Largest acceptable sup error of the synthetic Gaussian control.
    pub noise_floor: f64,
    /// Largest acceptable boundary term.
    pub boundary_term: f64,
    /// Standard errors allowed between simulated and exact covariance.
    pub se_multiple: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slope_min: -0.65,
            slope_max: -0.35,
            min_r_squared: 0.95,
            final_sup_error: 0.05,
            noise_floor: 0.01,
            boundary_term: 1e-8,
            se_multiple: 3.0,
        }
    }
}

fn default_start() -> usize {
    1
}

fn default_samples() -> usize {
    100_000
}

fn default_seed() -> SeedSpec {
    SeedSpec::new(0, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: PathBuf,
    /// 1-based.
    #[serde(default = "default_start")]
    pub start_state: usize,
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub zeta: ZetaGrid,
    #[serde(default)]
    pub lattice: LatticeGrid,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub bandwidth: BandwidthPolicy,
    #[serde(default = "default_seed")]
    pub seed: SeedSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Output directory; not part of the config hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

/// What a config is about to be used for; the checks differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Clt,
    CfRate,
    Density,
    LatticeScan,
}

impl ExperimentConfig {
    /// Reads and validates nothing but syntax; relative paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(origin.clone(), format!("cannot read config file: {e}")))?;
        let mut cfg = Self::parse(&text, &origin)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.model.is_relative() {
            cfg.model = base.join(&cfg.model);
        }
        if let Some(out) = &cfg.out {
            if out.is_relative() {
                cfg.out = Some(base.join(out));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(origin, e.to_string().trim_end()))
    }

    pub fn validate(&self, purpose: Purpose, states: usize) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(field, msg));
        if self.start_state == 0 || self.start_state > states {
            return bad("start_state", format!("must be in 1..={states}, got {}", self.start_state));
        }
        if purpose != Purpose::LatticeScan {
            let min = if purpose == Purpose::Clt { 1 } else { 2 };
            if self.t_grid.len() < min {
                return bad("t_grid", format!("needs at least {min} entries, got {}", self.t_grid.len()));
            }
            if let Some(t) = self.t_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return bad("t_grid", format!("horizons must be positive and finite, got {t}"));
            }
            if let Some(w) = self.t_grid.windows(2).find(|w| w[1] <= w[0]) {
                return bad("t_grid", format!("must be strictly increasing, found {} then {}", w[0], w[1]));
            }
        }
        let grid_ok = |g: (f64, f64)| g.0.is_finite() && g.1 > 0.0 && g.0 > g.1;
        if !grid_ok((self.zeta.radius, self.zeta.step)) {
            return bad("zeta", "need 0 < step < radius".into());
        }
        if !grid_ok((self.lattice.radius, self.lattice.step)) {
            return bad("lattice", "need 0 < step < radius".into());
        }
        match purpose {
            Purpose::Density if self.samples < MIN_DENSITY_SAMPLES => {
                return bad("samples", format!("density experiments need at least {MIN_DENSITY_SAMPLES}, got {}", self.samples));
            }
            Purpose::Clt if self.samples < 1000 => {
                return bad("samples", format!("covariance estimation needs at least 1000, got {}", self.samples));
            }
            _ => {}
        }
        match &self.bandwidth {
            BandwidthPolicy::Silverman { scale } if !(*scale > 0.0 && scale.is_finite()) => {
                return bad("bandwidth.scale", format!("must be positive, got {scale}"));
            }
            BandwidthPolicy::Fixed { value } if value.iter().any(|h| !(*h > 0.0 && h.is_finite())) => {
                return bad("bandwidth.value", "bandwidths must be positive".into());
            }
            _ => {}
        }
        let th = &self.thresholds;
        if !(th.slope_min < th.slope_max) {
            return bad("thresholds", "slope_min must be below slope_max".into());
        }
        Ok(())
    }

    /// SHA-256 over the effective config (as JSON) and the model file bytes.
    pub fn hash(&self, model_bytes: &[u8]) -> String {
        let mut canonical = self.clone();
        canonical.model = PathBuf::from(self.model.file_name().unwrap_or_default());
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        let mut h = Sha256::new();
        h.update(&json);
        h.update([0u8]);
        h.update(model_bytes);
        hex::encode(h.finalize())
    }
}

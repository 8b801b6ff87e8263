use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{ols, t_quantile_975};

/// Log-log power-law fit `y ≈ e^{intercept} t^{slope}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: [f64; 2],
    pub points: usize,
}

impl RateFit {
    pub fn slope_in(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.slope)
    }
}

pub fn fit_rate(ts: &[f64], ys: &[f64]) -> Result<RateFit> {
    if ts.len() != ys.len() {
        return Err(Error::DegenerateInput(format!("{} horizons but {} errors", ts.len(), ys.len())));
    }
    if ts.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 points, got {}", ts.len())));
    }
    if let Some(y) = ys.iter().find(|y| !(**y > 0.0)) {
        return Err(Error::DegenerateInput(format!("errors must be positive, got {y}")));
    }
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::DegenerateInput(format!("horizons must be positive, got {t}")));
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let fit = ols(&lx, &ly)?;
    let half = t_quantile_975(fit.points - 2) * fit.slope_se;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_ci: [fit.slope - half, fit.slope + half],
        points: fit.points,
    })
}

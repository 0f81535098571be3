//! Small statistical helpers: exponential-rate fits and binomial intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of a least-squares fit of `ln(value)` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `exp(slope)`: the fitted per-unit-`t` growth factor.
    pub rate: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub log_residual: f64,
    pub intercept: f64,
}

/// Fits `value ~ A * rate^t`. Needs at least three samples, all positive.
pub fn exponent_fit(samples: &[(f64, f64)]) -> Result<RateFit> {
    if samples.len() < 3 {
        return Err(Error::invalid(format!(
            "exponent fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(&(t, v)) = samples.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("nonpositive sample value {v} at t = {t}")));
    }
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, v) in samples {
        let dt = t - mean_t;
        stt += dt * dt;
        sty += dt * (v.ln() - mean_y);
    }
    if stt == 0.0 {
        return Err(Error::invalid("exponent fit needs at least two distinct t"));
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let sse: f64 = samples
        .iter()
        .map(|&(t, v)| (v.ln() - intercept - slope * t).powi(2))
        .sum();
    Ok(RateFit {
        rate: slope.exp(),
        log_residual: (sse / n).sqrt(),
        intercept,
    })
}

/// Wilson score interval for `hits` successes out of `trials`, at normal
/// quantile `z`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

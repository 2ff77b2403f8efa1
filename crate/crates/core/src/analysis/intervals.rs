use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Success frequency with its Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub low: f64,
    pub high: f64,
}

impl Estimate {
    pub fn wilson(successes: u64, trials: u64) -> Result<Self> {
        let (low, high) = wilson(successes, trials, Z95)?;
        Ok(Estimate { successes, trials, p: successes as f64 / trials as f64, low, high })
    }

    /// Variance of `log p̂` implied by the Wilson interval width.
    pub fn log_variance(&self) -> f64 {
        let sd = (self.high.ln() - self.low.ln()) / (2.0 * Z95);
        sd * sd
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("trials", "no trials"));
    }
    if successes > trials {
        return Err(invalid("successes", format!("{successes} exceeds {trials} trials")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::intervals::{Estimate, Z95};

/// One input point: gauge `⟨x⟩`, successes and trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub gauge: u64,
    pub successes: u64,
    pub trials: u64,
}

/// Weighted log-log fit `ln p̂ = intercept + slope · ln gauge`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope.
    pub slope_ci: (f64, f64),
    /// `(ln gauge, ln p̂, weight)` of the retained points.
    pub points_used: Vec<(f64, f64, f64)>,
    pub notes: Vec<String>,
}

impl RegressionResult {
    pub fn ci_contains(&self, v: f64) -> bool {
        self.slope_ci.0 <= v && v <= self.slope_ci.1
    }
}

/// Points with fewer than this many successes are dropped.
pub const MIN_SUCCESSES: u64 = 5;

/// Weighted least squares of `ln p̂` on `ln gauge`, weights the inverse
/// variance of `ln p̂` read off the Wilson interval. The slope interval is
/// widened by `sqrt(χ²/(n−2))` when the scatter exceeds the weights.
pub fn fit_decay_exponent(samples: &[DecaySample]) -> Result<RegressionResult> {
    let mut gauges: Vec<u64> = samples.iter().map(|s| s.gauge).collect();
    gauges.sort_unstable();
    gauges.dedup();
    if gauges.len() < 4 {
        return Err(invalid("samples", format!("need at least 4 distinct gauges, got {}", gauges.len())));
    }
    let mut notes = Vec::new();
    let mut pts = Vec::new();
    for s in samples {
        if s.successes < MIN_SUCCESSES {
            notes.push(format!("gauge {} dropped: {} successes", s.gauge, s.successes));
            continue;
        }
        let est = Estimate::wilson(s.successes, s.trials)?;
        pts.push(((s.gauge as f64).ln(), est.p.ln(), 1.0 / est.log_variance()));
    }
    if pts.len() < 2 {
        return Err(invalid("samples", "fewer than two points left after dropping"));
    }
    Ok(weighted_fit(pts, notes))
}

/// Weighted straight-line fit on `(x, y, w)` triples.
pub fn weighted_fit(pts: Vec<(f64, f64, f64)>, notes: Vec<String>) -> RegressionResult {
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = pts.len().saturating_sub(2).max(1) as f64;
    let scale = (chi2 / dof).max(1.0);
    let se = (scale / sxx).sqrt();
    RegressionResult {
        slope,
        intercept,
        slope_ci: (slope - Z95 * se, slope + Z95 * se),
        points_used: pts,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, Domain};
    use rand_distr::{Binomial, Distribution};

    fn power(g: u64) -> f64 {
        (g as f64).powi(-3)
    }

    #[test]
    fn exact_power_law_recovered() {
        let trials = 1_000_000_000_000_000u64;
        let samples: Vec<DecaySample> = [3u64, 5, 9, 17, 25]
            .iter()
            .map(|&g| DecaySample { gauge: g, successes: (power(g) * trials as f64).round() as u64, trials })
            .collect();
        let r = fit_decay_exponent(&samples).unwrap();
        assert!((r.slope + 3.0).abs() < 1e-6, "{}", r.slope);
    }

    #[test]
    fn interval_coverage_on_binomial_draws() {
        let gauges = [5u64, 7, 9, 13, 17];
        let trials = 200_000;
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = stream(123, Domain::Replica, rep);
            let samples: Vec<DecaySample> = gauges
                .iter()
                .map(|&g| DecaySample {
                    gauge: g,
                    successes: Binomial::new(trials, power(g)).unwrap().sample(&mut rng),
                    trials,
                })
                .collect();
            if fit_decay_exponent(&samples).unwrap().ci_contains(-3.0) {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }

    #[test]
    fn sparse_points_dropped_and_too_few_gauges_rejected() {
        let mk = |g, s| DecaySample { gauge: g, successes: s, trials: 1000 };
        let r = fit_decay_exponent(&[mk(2, 500), mk(3, 200), mk(4, 90), mk(5, 3)]).unwrap();
        assert_eq!(r.points_used.len(), 3);
        assert_eq!(r.notes.len(), 1);
        assert!(fit_decay_exponent(&[mk(2, 500), mk(3, 200), mk(3, 90)]).is_err());
        assert!(fit_decay_exponent(&[mk(2, 1), mk(3, 1), mk(4, 1), mk(5, 1)]).is_err());
    }
}

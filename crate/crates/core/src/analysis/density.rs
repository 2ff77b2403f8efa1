use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::Point;
use crate::soup::Soup;

/// Running averages of `1{x_n ∈ I}` along a ray, pooled over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub replicas: usize,
    /// Mean over replicas of `(1/n) Σ_{k<=n} 1{x_k ∈ I}`, for each `n`.
    pub running: Vec<f64>,
    pub terminal: f64,
    /// Standard error of the terminal average across replicas.
    pub standard_error: f64,
    pub target: f64,
    /// `(terminal − target) / standard_error`.
    pub z: f64,
}

impl DensityReport {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// Occupation indicators of `points` in one soup.
pub fn occupation(soup: &Soup, points: &[Point]) -> Vec<bool> {
    points.iter().map(|p| soup.occupied(p)).collect()
}

/// `P[0 ∈ I^u] = 1 − exp(−u cap{0})`.
pub fn one_point_density(u: f64, cap0: f64) -> f64 {
    1.0 - (-u * cap0).exp()
}

/// Aggregates per-replica indicator rows against the one-point density.
pub fn line_density(rows: &[Vec<bool>], u: f64, cap0: f64) -> Result<DensityReport> {
    let len = rows.first().map_or(0, Vec::len);
    if rows.len() < 2 || len == 0 || rows.iter().any(|r| r.len() != len) {
        return Err(invalid("rows", "need at least two replicas of equal, nonzero length"));
    }
    let r = rows.len() as f64;
    let mut running = vec![0.0; len];
    let mut terminal = Vec::with_capacity(rows.len());
    for row in rows {
        let mut acc = 0.0;
        for (n, &b) in row.iter().enumerate() {
            acc += b as u8 as f64;
            running[n] += acc / (n + 1) as f64 / r;
        }
        terminal.push(acc / len as f64);
    }
    let mean = terminal.iter().sum::<f64>() / r;
    let var = terminal.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let standard_error = (var / r).sqrt();
    let target = one_point_density(u, cap0);
    let z = if standard_error > 0.0 { (mean - target) / standard_error } else if mean == target { 0.0 } else { f64::INFINITY };
    Ok(DensityReport { replicas: rows.len(), running, terminal: mean, standard_error, target, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_average_of_a_fixed_pattern() {
        let rows = vec![vec![true, false, true, true], vec![false, false, true, true]];
        let r = line_density(&rows, 1.0, 0.5).unwrap();
        assert_eq!(r.running[0], 0.5);
        assert!((r.running[3] - 0.625).abs() < 1e-15);
        assert_eq!(r.terminal, 0.625);
        assert!((r.target - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(line_density(&[vec![true]], 1.0, 1.0).is_err());
        assert!(line_density(&[vec![true], vec![true, false]], 1.0, 1.0).is_err());
    }
}

//! Goodness-of-fit, homogeneity and correlation tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

use super::poisson::ln_poisson_pmf;

/// Significance level used repo-wide.
pub const ALPHA: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl TestResult {
    pub fn passes(&self) -> bool {
        self.p_value > ALPHA
    }
}

fn chi2_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df as f64).expect("positive df").cdf(stat)
}

/// Merges adjacent bins from both ends until every expected count is at
/// least `min_expected`.
fn merge_bins(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o;
                *le += e;
            }
            _ => {
                obs.push(o);
                exp.push(e);
            }
        }
    }
    (obs, exp)
}

/// Pearson chi-square of counts against probabilities (which must sum to
/// one); `fitted` parameters reduce the degrees of freedom.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], fitted: usize) -> Result<TestResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(invalid("observed", "observed counts and probabilities differ in length"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(invalid("observed", "no observations"));
    }
    let obs: Vec<f64> = observed.iter().map(|&c| c as f64).collect();
    let exp: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let (obs, exp) = merge_bins(&obs, &exp, 5.0);
    let statistic: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = obs.len().saturating_sub(1 + fitted);
    Ok(TestResult { statistic, df, p_value: chi2_sf(statistic, df) })
}

/// Chi-square test that `samples` are `Poisson(mean)`.
pub fn poisson_gof(samples: &[u64], mean: f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(invalid("samples", "no samples"));
    }
    let max = *samples.iter().max().unwrap() as usize;
    let top = max.max((mean + 10.0 * mean.sqrt() + 10.0) as usize);
    let mut counts = vec![0u64; top + 1];
    for &s in samples {
        counts[s as usize] += 1;
    }
    let mut probs: Vec<f64> = (0..=top as u64).map(|k| ln_poisson_pmf(k, mean).exp()).collect();
    let head: f64 = probs[..top].iter().sum();
    probs[top] = (1.0 - head).max(0.0);
    chi_square_gof(&counts, &probs, 0)
}

/// Chi-square test of homogeneity (equivalently independence) for a table
/// of counts; sparse columns are merged left to right.
pub fn chi_square_table(rows: &[Vec<u64>]) -> Result<TestResult> {
    let rows: Vec<&Vec<u64>> = rows.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    if rows.len() < 2 {
        return Ok(TestResult { statistic: 0.0, df: 0, p_value: 1.0 });
    }
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let col = |j: usize| rows.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum::<u64>();
    let total: u64 = rows.iter().map(|r| r.iter().sum::<u64>()).sum();
    let min_row = rows.iter().map(|r| r.iter().sum::<u64>()).min().unwrap() as f64;
    // merge columns until the smallest row expects >= 5 in each
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    let mut acc = 0u64;
    for j in 0..width {
        cur.push(j);
        acc += col(j);
        if min_row * acc as f64 / total as f64 >= 5.0 {
            groups.push(std::mem::take(&mut cur));
            acc = 0;
        }
    }
    if !cur.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(cur),
            None => groups.push(cur),
        }
    }
    let merged: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| groups.iter().map(|g| g.iter().map(|&j| r.get(j).copied().unwrap_or(0) as f64).sum()).collect())
        .collect();
    let col_tot: Vec<f64> = (0..groups.len()).map(|g| merged.iter().map(|r| r[g]).sum()).collect();
    let mut statistic = 0.0;
    for r in &merged {
        let rt: f64 = r.iter().sum();
        for (o, ct) in r.iter().zip(&col_tot) {
            let e = rt * ct / total as f64;
            if e > 0.0 {
                statistic += (o - e) * (o - e) / e;
            }
        }
    }
    let df = (merged.len() - 1) * groups.len().saturating_sub(1);
    Ok(TestResult { statistic, df, p_value: chi2_sf(statistic, df) })
}

/// Sample Pearson correlation and its z-score `r √n` under independence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub z: f64,
    pub n: usize,
}

pub fn correlation(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(invalid("a", "need at least 3 paired samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let r = if saa == 0.0 || sbb == 0.0 { 0.0 } else { sab / (saa * sbb).sqrt() };
    Ok(Correlation { r, z: r * n.sqrt(), n: a.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, Domain};
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn table_of_identical_rows_is_homogeneous() {
        let r = chi_square_table(&[vec![10, 20, 30], vec![10, 20, 30]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn gof_matches_hand_computation() {
        // 3 bins, observed (18, 22, 60) vs (0.2, 0.2, 0.6): chi2 = 0.2 + 0.2 + 0
        let r = chi_square_gof(&[18, 22, 60], &[0.2, 0.2, 0.6], 0).unwrap();
        assert!((r.statistic - 0.4).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_value - (-0.2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn poisson_gof_is_calibrated() {
        let mut rejections = 0;
        let trials = 1000;
        for i in 0..trials {
            let mut rng = stream(77, Domain::Replica, i);
            let d = Poisson::new(3.7).unwrap();
            let xs: Vec<u64> = (0..300).map(|_| d.sample(&mut rng) as u64).collect();
            if !poisson_gof(&xs, 3.7).unwrap().passes() {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!(rate <= 0.02, "rejection rate {rate}");
    }

    #[test]
    fn poisson_gof_rejects_wrong_mean() {
        let mut rng = stream(78, Domain::Replica, 0);
        let d = Poisson::new(4.0).unwrap();
        let xs: Vec<u64> = (0..2000).map(|_| d.sample(&mut rng) as u64).collect();
        assert!(!poisson_gof(&xs, 4.5).unwrap().passes());
    }

    #[test]
    fn correlation_of_independent_draws_is_small() {
        let mut rng = stream(79, Domain::Replica, 0);
        let d = Poisson::new(2.0).unwrap();
        let a: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        assert!(correlation(&a, &b).unwrap().z.abs() < 3.0);
        assert!((correlation(&a, &a).unwrap().r - 1.0).abs() < 1e-12);
    }
}

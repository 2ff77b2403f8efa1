use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::Point;
use crate::soup::Soup;

use super::hypothesis::{chi_square_table, TestResult};

/// Conditioning values with fewer events than this are dropped.
pub const MIN_EVENTS: u64 = 200;
/// Replicas required by [`nested_count_check`].
pub const MIN_REPLICAS: usize = 10_000;

/// Per-conditioning-value statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub s: u64,
    pub events: u64,
    /// `Σ_t |P̂[η_B = t | η_K = s] − P̂[η_B − η_K = t − s]|`.
    pub shift_tv: f64,
    /// `Σ_t |P̂[η_B = t | η_K = s] − P̂[η_B = t]|`, the quantity that vanishes
    /// as `B` grows.
    pub tv: f64,
    /// `sup_t |P̂[η_B <= t | η_K = s] − P̂[η_B <= t]|`: a lower bound on `tv`
    /// whose sampling noise does not grow with the support of `η_B`.
    pub kolmogorov: f64,
    /// Two-sample chi-square of `η_B − s | η_K = s` against `η_B − η_K` on the
    /// remaining replicas.
    pub shift_test: TestResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedReport {
    pub replicas: usize,
    /// Independence of `η_K` and `η_B − η_K` (contingency chi-square).
    pub independence: TestResult,
    pub rows: Vec<ShiftRow>,
    pub notes: Vec<String>,
}

/// `(η_K, η_B)` of one soup.
pub fn nested_counts(soup: &Soup, k: &[Point], b: &[Point]) -> (u64, u64) {
    (soup.count_hitting(k) as u64, soup.count_hitting(b) as u64)
}

fn pmf(values: impl Iterator<Item = u64>) -> (FxHashMap<u64, f64>, u64) {
    let mut m: FxHashMap<u64, f64> = FxHashMap::default();
    let mut n = 0;
    for v in values {
        *m.entry(v).or_default() += 1.0;
        n += 1;
    }
    m.values_mut().for_each(|c| *c /= n as f64);
    (m, n)
}

fn kolmogorov(a: &FxHashMap<u64, f64>, b: &FxHashMap<u64, f64>) -> f64 {
    let mut keys: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let (mut fa, mut fb, mut sup) = (0.0, 0.0, 0.0f64);
    for k in keys {
        fa += a.get(&k).unwrap_or(&0.0);
        fb += b.get(&k).unwrap_or(&0.0);
        sup = sup.max((fa - fb).abs());
    }
    sup
}

fn l1(a: &FxHashMap<u64, f64>, b: &FxHashMap<u64, f64>) -> f64 {
    let mut keys: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum()
}

/// Checks the conditional structure of nested hitting counts `η_K <= η_B`
/// from independent replicas, for conditioning values `s <= max_s`.
pub fn nested_count_check(pairs: &[(u64, u64)], max_s: u64) -> Result<NestedReport> {
    if pairs.len() < MIN_REPLICAS {
        return Err(invalid("replicas", format!("need at least {MIN_REPLICAS} replicas, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|(k, b)| k > b) {
        return Err(invalid("pairs", format!("η_K = {} exceeds η_B = {}", p.0, p.1)));
    }
    // contingency table of η_K against η_B − η_K
    let kmax = pairs.iter().map(|p| p.0).max().unwrap_or(0) as usize;
    let dmax = pairs.iter().map(|p| p.1 - p.0).max().unwrap_or(0) as usize;
    let mut table = vec![vec![0u64; dmax + 1]; kmax + 1];
    for &(k, b) in pairs {
        table[k as usize][(b - k) as usize] += 1;
    }
    // rows with few events are pooled into the last kept row
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for r in table {
        let kept_small = rows.last().is_some_and(|l: &Vec<u64>| l.iter().sum::<u64>() < MIN_EVENTS);
        if kept_small {
            let l = rows.last_mut().unwrap();
            l.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
        } else {
            rows.push(r);
        }
    }
    if rows.len() > 1 && rows.last().unwrap().iter().sum::<u64>() < MIN_EVENTS {
        let last = rows.pop().unwrap();
        rows.last_mut().unwrap().iter_mut().zip(&last).for_each(|(a, b)| *a += b);
    }
    let independence = chi_square_table(&rows)?;

    let (diff_all, _) = pmf(pairs.iter().map(|p| p.1 - p.0));
    let (b_all, _) = pmf(pairs.iter().map(|p| p.1));
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for s in 0..=max_s {
        let (cond, events) = pmf(pairs.iter().filter(|p| p.0 == s).map(|p| p.1));
        if events < MIN_EVENTS {
            notes.push(format!("s = {s} dropped: {events} conditioning events"));
            continue;
        }
        let shifted: FxHashMap<u64, f64> = diff_all.iter().map(|(d, p)| (d + s, *p)).collect();
        // two-sample comparison on disjoint replicas
        let hist = |it: &mut dyn Iterator<Item = u64>| {
            let mut h = vec![0u64; dmax + 1];
            it.for_each(|v| h[v as usize] += 1);
            h
        };
        let a = hist(&mut pairs.iter().filter(|p| p.0 == s).map(|p| p.1 - s));
        let b = hist(&mut pairs.iter().filter(|p| p.0 != s).map(|p| p.1 - p.0));
        out.push(ShiftRow {
            s,
            events,
            shift_tv: l1(&cond, &shifted),
            tv: l1(&cond, &b_all),
            kolmogorov: kolmogorov(&cond, &b_all),
            shift_test: chi_square_table(&[a, b])?,
        });
    }
    Ok(NestedReport { replicas: pairs.len(), independence, rows: out, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, Domain};
    use rand_distr::{Distribution, Poisson};

    fn synthetic(mu_k: f64, mu_d: f64, n: usize, seed: u64) -> Vec<(u64, u64)> {
        let mut rng = stream(seed, Domain::Replica, 0);
        let pk = Poisson::new(mu_k).unwrap();
        let pd = Poisson::new(mu_d).unwrap();
        (0..n)
            .map(|_| {
                let k = pk.sample(&mut rng) as u64;
                (k, k + pd.sample(&mut rng) as u64)
            })
            .collect()
    }

    #[test]
    fn equal_sets_pass_trivially() {
        let pairs: Vec<(u64, u64)> = synthetic(1.0, 1.0, 10_000, 1).into_iter().map(|(k, _)| (k, k)).collect();
        let r = nested_count_check(&pairs, 2).unwrap();
        assert!(r.independence.passes());
        assert!(r.rows.iter().all(|row| row.shift_tv == 0.0));
    }

    #[test]
    fn independent_poisson_counts_pass_and_tv_shrinks() {
        let small = nested_count_check(&synthetic(1.0, 3.0, 20_000, 2), 1).unwrap();
        let large = nested_count_check(&synthetic(1.0, 100.0, 20_000, 3), 1).unwrap();
        assert!(small.independence.passes() && large.independence.passes());
        assert!(small.rows.iter().all(|r| r.shift_test.passes()));
        assert!(large.rows[0].tv < small.rows[0].tv);
        assert!(large.rows[0].kolmogorov < small.rows[0].kolmogorov);
        assert!(small.rows.iter().all(|r| r.kolmogorov <= r.tv / 2.0 + 1e-12));
    }

    #[test]
    fn kolmogorov_of_point_masses() {
        let a: FxHashMap<u64, f64> = [(0, 0.5), (2, 0.5)].into_iter().collect();
        let b: FxHashMap<u64, f64> = [(1, 1.0)].into_iter().collect();
        assert_eq!(kolmogorov(&a, &b), 0.5);
        assert_eq!(kolmogorov(&a, &a), 0.0);
    }

    #[test]
    fn rare_conditioning_values_dropped() {
        let r = nested_count_check(&synthetic(0.5, 2.0, 10_000, 4), 6).unwrap();
        assert!(r.rows.iter().all(|row| row.events >= MIN_EVENTS));
        assert!(!r.notes.is_empty());
        assert!(nested_count_check(&synthetic(0.5, 2.0, 100, 4), 1).is_err());
    }
}

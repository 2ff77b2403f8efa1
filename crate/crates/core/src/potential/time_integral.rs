//! Green function as a time integral of the continuous-time walk:
//! `G(x) = d ∫_0^∞ Π_j e^{-s} I_{|x_j|}(s) ds` (with `s = t/d`).
//!
//! The integral is split into `[0, s_min]` (integrand ≈ `[x = 0]`), a
//! Gauss–Legendre quadrature in `ln s` over `[s_min, S]`, and an analytic tail
//! on `[S, ∞)` obtained by integrating the product of the Bessel asymptotic
//! series term by term.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::MAX_DIM;

use super::bessel::{asymptotic_coefficients, scaled_bessel};

const GL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration.
fn gauss_legendre() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = [(0.0, 0.0); GL_ORDER];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// Accuracy parameters of the time-integral method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegralConfig {
    /// Lower cut of the quadrature in `s`.
    pub s_min: f64,
    /// Panel width in `ln s`.
    pub panel: f64,
    /// Terms kept in the asymptotic tail series.
    pub tail_terms: usize,
    /// Target change of any value when the cut `S` is doubled.
    pub tolerance: f64,
}

impl Default for TimeIntegralConfig {
    fn default() -> Self {
        TimeIntegralConfig { s_min: 1e-12, panel: 0.5, tail_terms: 10, tolerance: 1e-10 }
    }
}

impl TimeIntegralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_min < 1e-3) {
            return Err(invalid("s_min", format!("{} not in (0, 1e-3)", self.s_min)));
        }
        if !(self.panel > 0.0 && self.panel <= 2.0) {
            return Err(invalid("panel", format!("{} not in (0, 2]", self.panel)));
        }
        if !(1..=30).contains(&self.tail_terms) {
            return Err(invalid("tail_terms", format!("{} not in 1..=30", self.tail_terms)));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// `G` at each canonical displacement (absolute coordinates) in `tuples`.
pub fn green_values(dim: usize, tuples: &[[u32; MAX_DIM]], cfg: &TimeIntegralConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if tuples.is_empty() {
        return Ok(Vec::new());
    }
    let kmax = tuples.iter().flat_map(|t| t[..dim].iter()).copied().max().unwrap_or(0) as f64;
    let mut cut = 25.0 * (kmax * kmax + 1.0);
    let mut prev = integrate(dim, tuples, cut, cfg);
    for _ in 0..20 {
        cut *= 2.0;
        let next = integrate(dim, tuples, cut, cfg);
        let change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < cfg.tolerance {
            return Ok(next);
        }
        prev = next;
    }
    Err(crate::Error::Numeric("time integral did not settle when doubling the cut".into()))
}

fn integrate(dim: usize, tuples: &[[u32; MAX_DIM]], cut: f64, cfg: &TimeIntegralConfig) -> Vec<f64> {
    let kmax = tuples.iter().flat_map(|t| t[..dim].iter()).copied().max().unwrap_or(0) as usize;
    let rule = gauss_legendre();
    let (lo, hi) = (cfg.s_min.ln(), cut.ln());
    let panels = ((hi - lo) / cfg.panel).ceil() as usize;
    let width = (hi - lo) / panels as f64;
    let mut acc = vec![0.0; tuples.len()];
    let mut table = vec![0.0; kmax + 1];
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        for &(node, weight) in rule.iter() {
            let s = (mid + 0.5 * width * node).exp();
            scaled_bessel(s, &mut table);
            let w = 0.5 * width * weight * s;
            for (a, t) in acc.iter_mut().zip(tuples) {
                *a += w * t[..dim].iter().map(|&k| table[k as usize]).product::<f64>();
            }
        }
    }
    for (a, t) in acc.iter_mut().zip(tuples) {
        if t[..dim].iter().all(|&k| k == 0) {
            *a += cfg.s_min;
        }
        *a += tail(dim, &t[..dim], cut, cfg.tail_terms);
        *a *= dim as f64;
    }
    acc
}

/// `∫_S^∞ Π_j e^{-s} I_{k_j}(s) ds` from the product of asymptotic series.
fn tail(dim: usize, ks: &[u32], cut: f64, terms: usize) -> f64 {
    let mut poly = vec![0.0; terms];
    poly[0] = 1.0;
    for &k in ks {
        let c = asymptotic_coefficients(k, terms);
        let mut next = vec![0.0; terms];
        for (i, pi) in poly.iter().enumerate() {
            for (j, cj) in c.iter().enumerate().take(terms - i) {
                next[i + j] += pi * cj;
            }
        }
        poly = next;
    }
    let half = dim as f64 / 2.0;
    let pref = (2.0 * PI).powf(-half);
    poly.iter()
        .enumerate()
        .map(|(m, pm)| pm * cut.powf(1.0 - half - m as f64) / (half + m as f64 - 1.0))
        .sum::<f64>()
        * pref
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tup(c: &[u32]) -> [u32; MAX_DIM] {
        let mut t = [0; MAX_DIM];
        t[..c.len()].copy_from_slice(c);
        t
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre();
        let total: f64 = r.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x30: f64 = r.iter().map(|(x, w)| w * x.powi(30)).sum();
        assert!((x30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn watson_value_in_three_dimensions() {
        // G(0) for Z^3 (Watson's integral)
        let g = green_values(3, &[tup(&[0, 0, 0])], &TimeIntegralConfig::default()).unwrap();
        assert!((g[0] - 1.516_386_059_151_978).abs() < 1e-9, "{}", g[0]);
    }

    #[test]
    fn panel_width_halving_is_invisible() {
        let ts = [tup(&[0, 0, 0, 0, 0]), tup(&[2, 1, 0, 0, 0]), tup(&[5, 0, 0, 0, 0])];
        let a = green_values(5, &ts, &TimeIntegralConfig::default()).unwrap();
        let fine = TimeIntegralConfig { panel: 0.25, ..Default::default() };
        let b = green_values(5, &ts, &fine).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_cut_insensitive() {
        // the tail series makes the result nearly independent of the cut
        let ts = [tup(&[1, 1, 0, 0, 0])];
        let cfg = TimeIntegralConfig::default();
        let a = integrate(5, &ts, 50.0, &cfg)[0];
        let b = integrate(5, &ts, 5000.0, &cfg)[0];
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn bad_parameters_rejected() {
        let cfg = TimeIntegralConfig { panel: 0.0, ..Default::default() };
        assert!(green_values(3, &[tup(&[0, 0, 0])], &cfg).is_err());
    }
}

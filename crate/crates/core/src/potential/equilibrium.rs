use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;

use super::cg::conjugate_gradient;
use super::GreenOracle;

/// Largest set accepted by [`equilibrium`].
pub const MAX_SET_SIZE: usize = 5000;
/// Above this support size the linear system is solved iteratively.
pub const DENSE_LIMIT: usize = 2000;
/// Negative equilibrium values smaller than this are treated as round-off.
pub const CLIP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Cholesky,
    ConjugateGradient,
}

/// Equilibrium measure and capacity of a finite set `K`.
///
/// `e_K` vanishes at points of `K` whose neighbours all lie in `K`, so the
/// last-exit system `Σ_y G(x − y) e_K(y) = 1` is solved on the support
/// (points of `K` with a neighbour outside `K`) only; the identity then holds
/// on all of `K` by the maximum principle. `green_sub` is the Green matrix on
/// that support.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    oracle: Arc<GreenOracle>,
    points: Vec<Point>,
    index: FxHashMap<Point, usize>,
    support: Vec<usize>,
    green_sub: Vec<f64>,
    eq: Vec<f64>,
    cap: f64,
    norm_eq: Vec<f64>,
    pub solver: Solver,
    /// `max_x |Σ_y G(x − y) e_K(y) − 1|` over the support.
    pub residual: f64,
    /// Most negative raw solution value before clipping (0 if none).
    pub clipped: f64,
}

/// Points of `points` with at least one neighbour outside the set.
pub fn inner_boundary(points: &[Point]) -> Vec<Point> {
    let set: FxHashSet<Point> = points.iter().copied().collect();
    points.iter().copied().filter(|p| p.neighbors().any(|q| !set.contains(&q))).collect()
}

pub fn equilibrium(oracle: &Arc<GreenOracle>, k: &[Point]) -> Result<PotentialTable> {
    let mut points = k.to_vec();
    points.sort();
    points.dedup();
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if points.len() > MAX_SET_SIZE {
        return Err(Error::UnsupportedSize { size: points.len(), max: MAX_SET_SIZE });
    }
    for p in &points {
        if p.dim() != oracle.dim() {
            return Err(Error::DimensionMismatch { left: p.dim(), right: oracle.dim() });
        }
    }
    let index: FxHashMap<Point, usize> = points.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let support: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.neighbors().any(|q| !index.contains_key(&q)))
        .map(|(i, _)| i)
        .collect();
    let n = support.len();
    let mut disp = Vec::with_capacity(n * n);
    for &i in &support {
        for &j in &support {
            disp.push(points[i].displacement(&points[j])?);
        }
    }
    let green_sub = oracle.green_many(&disp)?;
    drop(disp);

    let ones = vec![1.0; n];
    let (raw, solver) = if n <= DENSE_LIMIT {
        let m = DMatrix::from_row_slice(n, n, &green_sub);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Numeric("Green matrix is not positive definite".into()))?;
        (chol.solve(&DVector::from_column_slice(&ones)).as_slice().to_vec(), Solver::Cholesky)
    } else {
        let apply = |v: &[f64], out: &mut [f64]| {
            for (r, o) in out.iter_mut().enumerate() {
                *o = green_sub[r * n..(r + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
            }
        };
        let diag: Vec<f64> = (0..n).map(|r| green_sub[r * n + r]).collect();
        (conjugate_gradient(apply, &diag, &ones, 1e-13, 10 * n + 1000)?.x, Solver::ConjugateGradient)
    };

    let mut residual = 0.0f64;
    for r in 0..n {
        let s: f64 = green_sub[r * n..(r + 1) * n].iter().zip(&raw).map(|(a, b)| a * b).sum();
        residual = residual.max((s - 1.0).abs());
    }
    if residual > 1e-8 {
        return Err(Error::Numeric(format!("ill-conditioned equilibrium system (residual {residual:e})")));
    }
    let mut clipped = 0.0f64;
    let mut eq = vec![0.0; points.len()];
    for (&i, &v) in support.iter().zip(&raw) {
        if !(-CLIP_TOLERANCE..=1.0 + CLIP_TOLERANCE).contains(&v) {
            return Err(Error::Numeric(format!("equilibrium value {v:e} at {:?} outside [0, 1]", points[i])));
        }
        clipped = clipped.min(v);
        eq[i] = v.clamp(0.0, 1.0);
    }
    let cap: f64 = eq.iter().sum();
    let norm_eq = eq.iter().map(|v| v / cap).collect();
    Ok(PotentialTable {
        oracle: Arc::clone(oracle),
        points,
        index,
        support,
        green_sub,
        eq,
        cap,
        norm_eq,
        solver,
        residual,
        clipped,
    })
}

pub fn capacity(oracle: &Arc<GreenOracle>, k: &[Point]) -> Result<f64> {
    Ok(equilibrium(oracle, k)?.capacity())
}

/// `P_x[H_K < ∞]`.
pub fn hit_prob(oracle: &Arc<GreenOracle>, x: &Point, k: &[Point]) -> Result<f64> {
    equilibrium(oracle, k)?.hit_prob(x)
}

impl PotentialTable {
    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn oracle(&self) -> &Arc<GreenOracle> {
        &self.oracle
    }

    /// The set `K`, sorted.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.index.contains_key(x)
    }

    /// Points carrying equilibrium mass (a subset of the inner boundary).
    pub fn support(&self) -> impl Iterator<Item = &Point> + '_ {
        self.support.iter().map(|&i| &self.points[i])
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// `G(x − y)` for `x, y` in the support, in support order.
    pub fn green_sub(&self, a: usize, b: usize) -> f64 {
        self.green_sub[a * self.support.len() + b]
    }

    pub fn capacity(&self) -> f64 {
        self.cap
    }

    pub fn eq(&self, x: &Point) -> f64 {
        self.index.get(x).map_or(0.0, |&i| self.eq[i])
    }

    pub fn norm_eq(&self, x: &Point) -> f64 {
        self.index.get(x).map_or(0.0, |&i| self.norm_eq[i])
    }

    /// `(point, ẽ_K(point))` over the support.
    pub fn normalized(&self) -> Vec<(Point, f64)> {
        self.support.iter().map(|&i| (self.points[i], self.norm_eq[i])).collect()
    }

    /// `P_x[H_K < ∞] = Σ_y G(x − y) e_K(y)`; exactly 1 on `K`.
    pub fn hit_prob(&self, x: &Point) -> Result<f64> {
        if self.contains(x) {
            return Ok(1.0);
        }
        let disp = self
            .support
            .iter()
            .map(|&i| x.displacement(&self.points[i]))
            .collect::<Result<Vec<_>>>()?;
        let g = self.oracle.green_many(&disp)?;
        let p: f64 = g.iter().zip(&self.support).map(|(g, &i)| g * self.eq[i]).sum();
        if p > 1.0 + 1e-9 {
            return Err(Error::Numeric(format!("hitting probability {p} exceeds 1")));
        }
        Ok(p.min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ball;

    fn oracle(d: usize) -> Arc<GreenOracle> {
        Arc::new(GreenOracle::time_integral(d).unwrap())
    }

    #[test]
    fn single_point_is_inverse_green() {
        let g = oracle(5);
        let o = Point::origin(5).unwrap();
        let t = equilibrium(&g, &[o]).unwrap();
        let g0 = g.green(&o).unwrap();
        assert!((t.eq(&o) - 1.0 / g0).abs() < 1e-14);
        assert_eq!(t.capacity(), t.eq(&o));
        assert_eq!(t.hit_prob(&o).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_pair() {
        let g = oracle(5);
        let o = Point::origin(5).unwrap();
        let e1 = Point::axis(5, 0, 1).unwrap();
        let t = equilibrium(&g, &[o, e1]).unwrap();
        assert!((t.eq(&o) - t.eq(&e1)).abs() < 1e-14);
        // two-point formula: e = 1 / (G(0) + G(e1))
        let expected = 1.0 / (g.green(&o).unwrap() + g.green(&e1).unwrap());
        assert!((t.eq(&o) - expected).abs() < 1e-14);
    }

    #[test]
    fn interior_carries_no_mass_and_last_exit_identity_holds() {
        let g = oracle(4);
        let ball = Ball::centered(4, 2).unwrap();
        let t = equilibrium(&g, &ball.points()).unwrap();
        assert_eq!(t.support_len(), ball.sphere_points(2).len());
        assert_eq!(t.eq(&Point::origin(4).unwrap()), 0.0);
        let total: f64 = t.normalized().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // interior points: Σ_y G(x − y) e(y) = 1 even though x is off the support
        let o = Point::origin(4).unwrap();
        let disp: Vec<Point> = t.support().map(|y| o.displacement(y).unwrap()).collect();
        let s: f64 = g.green_many(&disp).unwrap().iter().zip(t.support()).map(|(gv, y)| gv * t.eq(y)).sum();
        assert!((s - 1.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn empty_and_oversized_sets_rejected() {
        let g = oracle(5);
        assert!(matches!(equilibrium(&g, &[]), Err(Error::EmptySet)));
        let big: Vec<Point> = (0..5001).map(|i| Point::axis(5, 0, i).unwrap()).collect();
        assert!(matches!(equilibrium(&g, &big), Err(Error::UnsupportedSize { .. })));
    }

    #[test]
    fn iterative_path_matches_dense() {
        // a line of 2100 points forces the iterative solver
        let g = oracle(5);
        let line: Vec<Point> = (0..2100).map(|i| Point::axis(5, 0, i).unwrap()).collect();
        let t = equilibrium(&g, &line).unwrap();
        assert_eq!(t.solver, Solver::ConjugateGradient);
        assert!(t.residual < 1e-9);
        let short: Vec<Point> = line[..1000].to_vec();
        let u = equilibrium(&g, &short).unwrap();
        assert_eq!(u.solver, Solver::Cholesky);
        // end-point masses of a long line converge
        assert!((t.eq(&line[0]) - u.eq(&line[0])).abs() < 1e-3);
    }
}

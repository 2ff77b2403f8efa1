//! Poisson soups of labelled trajectories meeting a finite base set.

mod io;
mod sample;

use std::sync::Arc;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Ball, Packer, Point};
use crate::walk::{Region, WalkPath};

pub use io::{read_jsonl, read_jsonl_file, write_jsonl, write_jsonl_file, SoupHeader, TrajectoryRecord};
pub use sample::{sample_soup, sample_soup_thinned, SoupSampler, ThinningSampler};

/// Finite base set of a soup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Base {
    Ball { center: Point, radius: u32 },
    Points { points: Vec<Point> },
}

impl Base {
    pub fn ball(dim: usize, radius: u32) -> Result<Self> {
        Ok(Base::Ball { center: Point::origin(dim)?, radius })
    }

    pub fn points(pts: &[Point]) -> Result<Self> {
        let mut points = pts.to_vec();
        points.sort();
        points.dedup();
        let first = points.first().ok_or(Error::EmptySet)?;
        if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch { left: p.dim(), right: first.dim() });
        }
        Ok(Base::Points { points })
    }

    pub fn dim(&self) -> usize {
        match self {
            Base::Ball { center, .. } => center.dim(),
            Base::Points { points } => points[0].dim(),
        }
    }

    /// Enumerates the set (use with care for large balls).
    pub fn to_points(&self) -> Vec<Point> {
        match self {
            Base::Ball { center, radius } => Ball::new(*center, *radius).points(),
            Base::Points { points } => points.clone(),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            Base::Ball { center, radius } => Ball::new(*center, *radius).volume(),
            Base::Points { points } => points.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest ℓ1 norm of a base point.
    pub fn extent(&self) -> u64 {
        match self {
            Base::Ball { center, radius } => center.l1_norm() + *radius as u64,
            Base::Points { points } => points.iter().map(|p| p.l1_norm()).max().unwrap_or(0),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Base::Ball { center, radius } => Ball::new(*center, *radius).contains(p),
            Base::Points { points } => points.binary_search(p).is_ok(),
        }
    }

    pub fn region(&self, packer: &Packer) -> Result<Region> {
        match self {
            Base::Ball { center, radius } => Ok(Region::Ball(Ball::new(*center, *radius))),
            Base::Points { points } => Region::from_points(packer, points),
        }
    }
}

/// One soup element: a doubly infinite trajectory cut to the escape ball,
/// stored as the conditioned backward part and the free forward part, both
/// rooted at `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub label: f64,
    pub start: Point,
    pub forward: WalkPath,
    pub backward: WalkPath,
    trace: FxHashSet<u64>,
    pub truncated: bool,
}

impl Trajectory {
    pub fn new(label: f64, start: Point, forward: WalkPath, backward: WalkPath) -> Self {
        let mut trace = FxHashSet::default();
        trace.reserve(forward.keys().len() + backward.keys().len());
        trace.extend(forward.keys().iter().copied());
        trace.extend(backward.keys().iter().copied());
        let truncated = forward.truncated || backward.truncated;
        Trajectory { label, start, forward, backward, trace, truncated }
    }

    /// Packed keys of the visited points.
    pub fn trace(&self) -> &FxHashSet<u64> {
        &self.trace
    }

    pub fn covers(&self, key: u64) -> bool {
        self.trace.contains(&key)
    }

    pub fn meets(&self, other: &Trajectory) -> bool {
        let (small, large) =
            if self.trace.len() <= other.trace.len() { (&self.trace, &other.trace) } else { (&other.trace, &self.trace) };
        small.iter().any(|k| large.contains(k))
    }

    pub fn meets_keys(&self, keys: &FxHashSet<u64>) -> bool {
        if keys.len() < self.trace.len() {
            keys.iter().any(|k| self.trace.contains(k))
        } else {
            self.trace.iter().any(|k| keys.contains(k))
        }
    }

    /// Smallest ℓ1 norm along the trace.
    pub fn min_norm(&self, packer: &Packer) -> u64 {
        self.trace.iter().map(|&k| packer.unpack(k).l1_norm()).min().unwrap_or(0)
    }

    /// The time-ordered path: reversed backward part, then the forward part.
    pub fn full_path(&self) -> Vec<u64> {
        let b = self.backward.keys();
        let mut out: Vec<u64> = b.iter().rev().copied().collect();
        out.extend_from_slice(self.forward.keys().get(1..).unwrap_or(&[]));
        out
    }
}

/// How a soup was sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// `N ~ Poisson(u cap K)` starts drawn from the normalized equilibrium
    /// measure.
    Explicit,
    /// `Poisson(u |∂K|)` uniform boundary proposals, kept when the walk from
    /// the proposal never returns to `K`.
    Thinning,
    /// Built from other soups (generation thinning, file input).
    Derived,
}

/// Sampled Poisson collection of trajectories meeting `base`, with labels in
/// `[u_low, u_high]`. Immutable; slices share trajectory data.
#[derive(Clone, Debug, PartialEq)]
pub struct Soup {
    packer: Packer,
    pub base: Base,
    pub u_low: f64,
    pub u_high: f64,
    trajectories: Vec<Arc<Trajectory>>,
    pub seed: u64,
    pub escape_radius: u32,
    /// Capacity behind the Poisson count (explicit sampler only).
    pub cap_k: Option<f64>,
    pub sampler: Sampler,
    /// Bound on the probability that a discarded tail returns to the base.
    pub truncation_bound: Option<f64>,
}

impl Soup {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        base: Base,
        u_low: f64,
        u_high: f64,
        trajectories: Vec<Arc<Trajectory>>,
        seed: u64,
        escape_radius: u32,
        cap_k: Option<f64>,
        sampler: Sampler,
    ) -> Result<Self> {
        check_interval(u_low, u_high)?;
        let packer = Packer::new(base.dim())?;
        Ok(Soup { packer, base, u_low, u_high, trajectories, seed, escape_radius, cap_k, sampler, truncation_bound: None })
    }

    pub fn dim(&self) -> usize {
        self.packer.dim()
    }

    pub fn packer(&self) -> &Packer {
        &self.packer
    }

    pub fn trajectories(&self) -> &[Arc<Trajectory>] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn intensity(&self) -> f64 {
        self.u_high - self.u_low
    }

    /// Trajectories with label in `[t1, t2]`.
    pub fn slice(&self, t1: f64, t2: f64) -> Result<Soup> {
        if !(self.u_low <= t1 && t1 <= t2 && t2 <= self.u_high) {
            return Err(Error::InvalidInterval { low: t1, high: t2 });
        }
        let trajectories = self.trajectories.iter().filter(|t| t1 <= t.label && t.label <= t2).cloned().collect();
        Ok(self.with_trajectories(trajectories, t1, t2, self.sampler))
    }

    fn with_trajectories(&self, trajectories: Vec<Arc<Trajectory>>, u_low: f64, u_high: f64, sampler: Sampler) -> Soup {
        Soup {
            packer: self.packer,
            base: self.base.clone(),
            u_low,
            u_high,
            trajectories,
            seed: self.seed,
            escape_radius: self.escape_radius,
            cap_k: self.cap_k,
            sampler,
            truncation_bound: self.truncation_bound,
        }
    }

    /// Keeps the trajectories for which `keep` holds; the interval and base
    /// are unchanged.
    pub fn filter(&self, keep: impl Fn(&Trajectory) -> bool) -> Soup {
        let trajectories = self.trajectories.iter().filter(|t| keep(t)).cloned().collect();
        self.with_trajectories(trajectories, self.u_low, self.u_high, Sampler::Derived)
    }

    /// Whether some trace contains `p`.
    pub fn occupied(&self, p: &Point) -> bool {
        self.packer.pack(p).is_ok_and(|k| self.trajectories.iter().any(|t| t.covers(k)))
    }

    /// `I ∩ window`: window points on at least one trace, in window order.
    pub fn interlacement_set(&self, window: &[Point]) -> Vec<Point> {
        let keys: Vec<Option<u64>> = window.iter().map(|p| self.packer.pack(p).ok()).collect();
        window
            .iter()
            .zip(keys)
            .filter(|(_, k)| k.is_some_and(|k| self.trajectories.iter().any(|t| t.covers(k))))
            .map(|(p, _)| *p)
            .collect()
    }

    /// Number of trajectories whose trace meets `a`.
    pub fn count_hitting(&self, a: &[Point]) -> usize {
        let keys: FxHashSet<u64> = a.iter().filter_map(|p| self.packer.pack(p).ok()).collect();
        if keys.is_empty() {
            return 0;
        }
        self.trajectories.iter().filter(|t| t.meets_keys(&keys)).count()
    }
}

pub(crate) fn check_interval(u_low: f64, u_high: f64) -> Result<()> {
    if u_low.is_finite() && u_high.is_finite() && 0.0 <= u_low && u_low < u_high {
        Ok(())
    } else {
        Err(Error::InvalidInterval { low: u_low, high: u_high })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{equilibrium, GreenOracle};
    use crate::stream::{stream, Domain};

    fn oracle() -> Arc<GreenOracle> {
        Arc::new(GreenOracle::time_integral(5).unwrap())
    }

    fn small_soup(seed: u64) -> Soup {
        let table = equilibrium(&oracle(), &Ball::centered(5, 1).unwrap().points()).unwrap();
        sample_soup(&table, 0.0, 3.0, 10, seed).unwrap()
    }

    #[test]
    fn interval_must_be_strict() {
        let table = equilibrium(&oracle(), &[Point::origin(5).unwrap()]).unwrap();
        assert!(matches!(sample_soup(&table, 1.0, 1.0, 8, 0), Err(Error::InvalidInterval { .. })));
        assert!(sample_soup(&table, 2.0, 1.0, 8, 0).is_err());
        assert!(sample_soup(&table, 1.0, 1.0 + 1e-9, 8, 0).is_ok());
    }

    #[test]
    fn trajectory_invariants() {
        let s = small_soup(1);
        assert!(!s.is_empty());
        let k = Ball::centered(5, 1).unwrap();
        for t in s.trajectories() {
            assert!(k.contains(&t.start));
            assert!(t.covers(s.packer().pack(&t.start).unwrap()));
            assert!((0.0..=3.0).contains(&t.label));
            let back: Vec<Point> = t.backward.points(s.packer()).collect();
            assert_eq!(back[0], t.start);
            assert!(back[1..].iter().all(|p| !k.contains(p)));
            let fwd: Vec<Point> = t.forward.points(s.packer()).collect();
            assert_eq!(fwd[0], t.start);
            assert_eq!(t.full_path().len(), back.len() + fwd.len() - 1);
        }
    }

    #[test]
    fn slicing() {
        let s = small_soup(2);
        assert_eq!(s.slice(0.0, 3.0).unwrap(), s);
        assert!(s.slice(1.5, 1.5).unwrap().is_empty());
        let a = s.slice(0.0, 1.2).unwrap().len();
        let b = s.slice(1.2, 3.0).unwrap().len();
        assert_eq!(a + b, s.len());
        assert!(s.slice(-1.0, 1.0).is_err());
        assert!(s.slice(2.0, 1.0).is_err());
    }

    #[test]
    fn queries() {
        let s = small_soup(3);
        let k = Ball::centered(5, 1).unwrap().points();
        assert_eq!(s.count_hitting(&k), s.len());
        assert_eq!(s.count_hitting(&[]), 0);
        let inner = [Point::origin(5).unwrap()];
        assert!(s.count_hitting(&inner) <= s.count_hitting(&k));
        let occ = s.interlacement_set(&k);
        for t in s.trajectories() {
            assert!(occ.contains(&t.start));
        }
        let empty = s.slice(1.0, 1.0).unwrap();
        assert!(empty.interlacement_set(&k).is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(small_soup(7), small_soup(7));
        assert_ne!(small_soup(7), small_soup(8));
    }

    #[test]
    fn trajectories_meet_symmetrically() {
        let packer = Packer::new(5).unwrap();
        let mut rng = stream(11, Domain::Replica, 0);
        let o = Point::origin(5).unwrap();
        let mk = |rng: &mut crate::stream::Stream| {
            let f = crate::walk::simulate_forward(&o, 6, rng).unwrap();
            let b = crate::walk::simulate_forward(&o, 6, rng).unwrap();
            Trajectory::new(0.5, o, f, b)
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        assert!(a.meets(&b) && b.meets(&a));
        assert_eq!(a.min_norm(&packer), 0);
    }
}

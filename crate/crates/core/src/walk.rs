//! Simple random walk engine on packed coordinates.
//!
//! All walks are stopped at the first exit from the ℓ1 ball of radius
//! `stop_radius` around the origin (the experiment's base center).

use rand::RngCore;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Ball, Packer, Point, MAX_DIM};
use crate::potential::GreenOracle;

/// Guard against walks that never leave their stopping ball.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

/// Uniform directions in `0..2d`, two per `u64` draw (Lemire's method with
/// rejection on each 32-bit half).
pub struct Directions {
    n: u32,
    threshold: u32,
    buf: u64,
    left: u8,
}

impl Directions {
    pub fn new(dim: usize) -> Self {
        let n = 2 * dim as u32;
        Directions { n, threshold: n.wrapping_neg() % n, buf: 0, left: 0 }
    }

    #[inline]
    pub fn next<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> usize {
        loop {
            if self.left == 0 {
                self.buf = rng.next_u64();
                self.left = 2;
            }
            let half = self.buf as u32;
            self.buf >>= 32;
            self.left -= 1;
            let m = half as u64 * self.n as u64;
            if (m as u32) >= self.threshold {
                return (m >> 32) as usize;
            }
        }
    }
}

/// Walker position: coordinates, packed key and ℓ1 norm, updated together.
#[derive(Clone, Debug)]
pub struct Walker {
    packer: Packer,
    coords: [i32; MAX_DIM],
    key: u64,
    norm: i64,
}

impl Walker {
    pub fn new(packer: Packer, x: &Point) -> Result<Self> {
        let key = packer.pack(x)?;
        let mut coords = [0; MAX_DIM];
        coords[..x.dim()].copy_from_slice(x.coords());
        Ok(Walker { packer, coords, key, norm: x.l1_norm() as i64 })
    }

    #[inline]
    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn norm(&self) -> i64 {
        self.norm
    }

    #[inline]
    pub fn coords(&self) -> &[i32; MAX_DIM] {
        &self.coords
    }

    pub fn point(&self) -> Point {
        self.packer.unpack(self.key)
    }

    #[inline]
    pub fn step(&mut self, dir: usize) {
        let axis = dir >> 1;
        let old = self.coords[axis];
        let stride = self.packer.stride(axis);
        let new = if dir & 1 == 0 {
            self.key = self.key.wrapping_add(stride);
            old + 1
        } else {
            self.key = self.key.wrapping_sub(stride);
            old - 1
        };
        self.coords[axis] = new;
        self.norm += (new.abs() - old.abs()) as i64;
    }
}

/// A finite set that walks test membership against at every step.
#[derive(Clone, Debug)]
pub enum Region {
    Empty,
    Ball(Ball),
    Keys(FxHashSet<u64>),
}

impl Region {
    pub fn from_points(packer: &Packer, pts: &[Point]) -> Result<Self> {
        Ok(Region::Keys(pts.iter().map(|p| packer.pack(p)).collect::<Result<_>>()?))
    }

    #[inline]
    pub fn contains(&self, w: &Walker) -> bool {
        match self {
            Region::Empty => false,
            Region::Ball(b) => {
                if b.center.coords().iter().all(|&c| c == 0) {
                    w.norm <= b.radius as i64
                } else {
                    let d = b.dim();
                    let dist: i64 = (0..d).map(|i| (w.coords[i] as i64 - b.center.coords()[i] as i64).abs()).sum();
                    dist <= b.radius as i64
                }
            }
            Region::Keys(set) => set.contains(&w.key),
        }
    }

    pub fn contains_point(&self, packer: &Packer, p: &Point) -> bool {
        match self {
            Region::Empty => false,
            Region::Ball(b) => b.contains(p),
            Region::Keys(set) => packer.pack(p).is_ok_and(|k| set.contains(&k)),
        }
    }

    pub fn is_single_point(&self) -> bool {
        matches!(self, Region::Keys(s) if s.len() == 1) || matches!(self, Region::Ball(b) if b.radius == 0)
    }
}

/// A nearest-neighbour path stored as packed keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkPath {
    keys: Vec<u64>,
    /// Index of the root within the walk it was cut from (0 unless the path
    /// is a last-visit suffix).
    pub start_index: usize,
    /// Stopped at the escape radius rather than ending naturally.
    pub truncated: bool,
    pub escape_radius: u32,
}

impl WalkPath {
    pub fn from_keys(keys: Vec<u64>, start_index: usize, truncated: bool, escape_radius: u32) -> Self {
        WalkPath { keys, start_index, truncated, escape_radius }
    }

    /// Builds a path from points, checking nearest-neighbour steps.
    pub fn from_points(packer: &Packer, pts: &[Point], truncated: bool, escape_radius: u32) -> Result<Self> {
        for w in pts.windows(2) {
            if crate::lattice::l1_dist(&w[0], &w[1])? != 1 {
                return Err(Error::Format(format!("non-adjacent steps {:?} -> {:?}", w[0], w[1])));
            }
        }
        let keys = pts.iter().map(|p| packer.pack(p)).collect::<Result<Vec<_>>>()?;
        Ok(WalkPath { keys, start_index: 0, truncated, escape_radius })
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    /// Number of steps.
    pub fn steps(&self) -> usize {
        self.keys.len().saturating_sub(1)
    }

    pub fn points<'a>(&'a self, packer: &'a Packer) -> impl Iterator<Item = Point> + 'a {
        self.keys.iter().map(move |&k| packer.unpack(k))
    }
}

/// Runs a walk from `x` until it leaves the ball of radius `stop`, calling
/// `visit(time, walker)` at every position including the start; `visit`
/// returning `false` stops early. Returns whether the walk reached the stop.
pub fn drive<R: RngCore + ?Sized>(
    packer: &Packer,
    x: &Point,
    stop: u32,
    rng: &mut R,
    budget: u64,
    mut visit: impl FnMut(u64, &Walker) -> bool,
) -> Result<bool> {
    packer.check_radius(stop as u64)?;
    let mut w = Walker::new(*packer, x)?;
    if !visit(0, &w) {
        return Ok(false);
    }
    if w.norm > stop as i64 {
        return Ok(true);
    }
    let mut dirs = Directions::new(packer.dim());
    let mut t = 0u64;
    loop {
        if t >= budget {
            return Err(Error::Runaway { budget });
        }
        w.step(dirs.next(rng));
        t += 1;
        if !visit(t, &w) {
            return Ok(false);
        }
        if w.norm > stop as i64 {
            debug_assert_eq!(
                (0..packer.dim()).map(|i| (w.coords[i] - x.coords()[i]).unsigned_abs() as u64).sum::<u64>() % 2,
                t % 2,
                "parity of displacement and step count disagree"
            );
            return Ok(true);
        }
    }
}

/// Simple random walk from `x`, stopped at the first exit from the ball of
/// radius `stop`. A start already outside gives a path of length 0.
pub fn simulate_forward<R: RngCore + ?Sized>(x: &Point, stop: u32, rng: &mut R) -> Result<WalkPath> {
    simulate_forward_budget(x, stop, rng, DEFAULT_STEP_BUDGET)
}

pub fn simulate_forward_budget<R: RngCore + ?Sized>(
    x: &Point,
    stop: u32,
    rng: &mut R,
    budget: u64,
) -> Result<WalkPath> {
    let packer = Packer::new(x.dim())?;
    let mut keys = Vec::new();
    drive(&packer, x, stop, rng, budget, |_, w| {
        keys.push(w.key());
        true
    })?;
    Ok(WalkPath { keys, start_index: 0, truncated: true, escape_radius: stop })
}

/// Whether the walk from `x` leaves the ball of radius `stop` before
/// entering `k` at some time `>= 1`.
pub fn escapes<R: RngCore + ?Sized>(x: &Point, k: &Region, stop: u32, rng: &mut R) -> Result<bool> {
    let packer = Packer::new(x.dim())?;
    drive(&packer, x, stop, rng, DEFAULT_STEP_BUDGET, |t, w| t == 0 || !k.contains(w))
}

/// How [`conditioned_no_return`] produces a path that avoids `K` after time 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// Suffix of one walk after its last visit to `K`, re-rooted there. Its
    /// root is `x` only when `K = {x}`.
    LastVisit,
    /// Fresh walks from `x` until one leaves without returning to `K`.
    Rejection,
    /// `LastVisit` for a single point, `Rejection` otherwise.
    Auto,
}

/// A walk from `x` conditioned never to return to `K` (up to truncation at
/// the stop radius).
pub fn conditioned_no_return<R: RngCore + ?Sized>(
    x: &Point,
    k: &Region,
    stop: u32,
    rng: &mut R,
    method: Conditioning,
) -> Result<WalkPath> {
    let packer = Packer::new(x.dim())?;
    let method = match method {
        Conditioning::Auto if k.is_single_point() => Conditioning::LastVisit,
        Conditioning::Auto => Conditioning::Rejection,
        m => m,
    };
    match method {
        Conditioning::LastVisit => {
            let mut keys = Vec::new();
            let mut last = 0;
            drive(&packer, x, stop, rng, DEFAULT_STEP_BUDGET, |t, w| {
                if k.contains(w) {
                    last = t as usize;
                }
                keys.push(w.key());
                true
            })?;
            keys.drain(..last);
            Ok(WalkPath { keys, start_index: last, truncated: true, escape_radius: stop })
        }
        _ => {
            let mut spent = 0u64;
            loop {
                let mut keys = Vec::new();
                let escaped = drive(&packer, x, stop, rng, DEFAULT_STEP_BUDGET - spent, |t, w| {
                    keys.push(w.key());
                    t == 0 || !k.contains(w)
                })?;
                spent += keys.len() as u64;
                if escaped {
                    return Ok(WalkPath { keys, start_index: 0, truncated: true, escape_radius: stop });
                }
                if spent >= DEFAULT_STEP_BUDGET {
                    return Err(Error::Runaway { budget: DEFAULT_STEP_BUDGET });
                }
            }
        }
    }
}

/// Bound on the probability that a walk, once outside the ball of radius
/// `escape`, ever returns to an observation set of capacity `cap` inside the
/// ball of radius `observed`: `cap · max_{|z| > escape, |y| <= observed} G(z − y)`.
pub fn return_bound(oracle: &GreenOracle, cap: f64, observed: u32, escape: u32) -> Result<f64> {
    if escape < observed {
        return Err(invalid("escape", format!("escape radius {escape} inside observed radius {observed}")));
    }
    Ok((cap * oracle.max_beyond(escape + 1 - observed)?).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, Domain};

    #[test]
    fn directions_cover_all_neighbours_uniformly() {
        let mut rng = stream(1, Domain::Replica, 0);
        let mut d = Directions::new(5);
        let mut counts = [0u64; 10];
        let n = 1_000_000;
        for _ in 0..n {
            counts[d.next(&mut rng)] += 1;
        }
        let e = n as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let p = 1.0 - statrs::distribution::ContinuousCDF::cdf(
            &statrs::distribution::ChiSquared::new(9.0).unwrap(),
            chi2,
        );
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn start_outside_gives_empty_walk() {
        let mut rng = stream(2, Domain::Replica, 0);
        let x = Point::axis(5, 1, 6).unwrap();
        let path = simulate_forward(&x, 5, &mut rng).unwrap();
        assert_eq!(path.steps(), 0);
    }

    #[test]
    fn paths_are_nearest_neighbour_and_end_outside() {
        let mut rng = stream(3, Domain::Replica, 0);
        let packer = Packer::new(4).unwrap();
        for _ in 0..50 {
            let path = simulate_forward(&Point::origin(4).unwrap(), 10, &mut rng).unwrap();
            let pts: Vec<Point> = path.points(&packer).collect();
            for w in pts.windows(2) {
                assert_eq!(crate::lattice::l1_dist(&w[0], &w[1]).unwrap(), 1);
            }
            assert_eq!(pts.last().unwrap().l1_norm(), 11);
            assert!(pts[..pts.len() - 1].iter().all(|p| p.l1_norm() <= 10));
            // parity of displacement matches parity of step count
            assert_eq!(pts.last().unwrap().l1_norm() % 2, path.steps() as u64 % 2);
        }
    }

    #[test]
    fn deterministic_given_stream() {
        let a = simulate_forward(&Point::origin(5).unwrap(), 12, &mut stream(9, Domain::Soup, 4)).unwrap();
        let b = simulate_forward(&Point::origin(5).unwrap(), 12, &mut stream(9, Domain::Soup, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.keys(), b.keys());
    }

    #[test]
    fn runaway_is_reported() {
        let mut rng = stream(4, Domain::Replica, 0);
        let r = simulate_forward_budget(&Point::origin(3).unwrap(), 50, &mut rng, 10);
        assert!(matches!(r, Err(Error::Runaway { budget: 10 })));
    }

    #[test]
    fn empty_region_always_escapes() {
        let mut rng = stream(5, Domain::Replica, 0);
        for _ in 0..20 {
            assert!(escapes(&Point::origin(3).unwrap(), &Region::Empty, 6, &mut rng).unwrap());
        }
    }

    #[test]
    fn conditioned_paths_never_return() {
        let packer = Packer::new(5).unwrap();
        let k = Region::Ball(Ball::centered(5, 1).unwrap());
        let x = Point::axis(5, 2, -1).unwrap();
        let mut rng = stream(6, Domain::Replica, 0);
        for method in [Conditioning::Rejection, Conditioning::LastVisit] {
            for _ in 0..100 {
                let path = conditioned_no_return(&x, &k, 8, &mut rng, method).unwrap();
                let pts: Vec<Point> = path.points(&packer).collect();
                assert!(pts[1..].iter().all(|p| p.l1_norm() > 1));
                if method == Conditioning::Rejection {
                    assert_eq!(pts[0], x);
                } else {
                    assert!(pts[0].l1_norm() <= 1);
                }
            }
        }
    }

    #[test]
    fn last_visit_suffix_is_rooted_at_a_single_point() {
        let packer = Packer::new(5).unwrap();
        let o = Point::origin(5).unwrap();
        let k = Region::from_points(&packer, &[o]).unwrap();
        let mut rng = stream(7, Domain::Replica, 0);
        for _ in 0..100 {
            let path = conditioned_no_return(&o, &k, 8, &mut rng, Conditioning::Auto).unwrap();
            let pts: Vec<Point> = path.points(&packer).collect();
            assert_eq!(pts[0], o);
            assert!(pts[1..].iter().all(|p| *p != o));
        }
    }
}

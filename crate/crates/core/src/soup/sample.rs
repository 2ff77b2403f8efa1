use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Poisson;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Packer, Point, SphereSampler};
use crate::potential::{GreenOracle, PotentialTable, MAX_SET_SIZE};
use crate::stream::{stream, Domain, Stream};
use crate::walk::{conditioned_no_return, drive, simulate_forward, Conditioning, Region, WalkPath, DEFAULT_STEP_BUDGET};

use super::{check_interval, Base, Sampler, Soup, Trajectory};

fn poisson_count(mean: f64, rng: &mut Stream) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::Numeric(format!("Poisson mean {mean}: {e}")))?;
    Ok(p.sample(rng) as u64)
}

fn check_escape(packer: &Packer, base: &Base, escape: u32) -> Result<()> {
    if base.extent() > escape as u64 {
        return Err(invalid("escape_radius", format!("{escape} does not contain the base (extent {})", base.extent())));
    }
    packer.check_radius(escape as u64)
}

/// Samples the soup on `K = table.points()`: `N ~ Poisson((u_high − u_low)
/// cap K)`, then per trajectory a uniform label, a start from `ẽ_K`, a
/// backward walk conditioned never to return to `K` and a free forward walk.
///
/// Stream index 0 of the `soup` domain draws `N`; index `i + 1` drives
/// trajectory `i`, so trajectories can be generated in parallel.
pub fn sample_soup(table: &PotentialTable, u_low: f64, u_high: f64, escape: u32, seed: u64) -> Result<Soup> {
    check_interval(u_low, u_high)?;
    let base = Base::points(table.points())?;
    let packer = Packer::new(base.dim())?;
    check_escape(&packer, &base, escape)?;
    let region = base.region(&packer)?;
    let support: Vec<(Point, f64)> = table.normalized();
    let weights = WeightedIndex::new(support.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Numeric(format!("equilibrium weights: {e}")))?;
    let cap = table.capacity();
    let n = poisson_count((u_high - u_low) * cap, &mut stream(seed, Domain::Soup, 0))?;
    let trajectories = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Soup, i + 1);
            let label = u_low + (u_high - u_low) * rng.gen::<f64>();
            let start = support[weights.sample(&mut rng)].0;
            let backward = conditioned_no_return(&start, &region, escape, &mut rng, Conditioning::Auto)?;
            let forward = simulate_forward(&start, escape, &mut rng)?;
            Ok(Arc::new(Trajectory::new(label, start, forward, backward)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut soup = Soup::from_parts(base, u_low, u_high, trajectories, seed, escape, Some(cap), Sampler::Explicit)?;
    soup.truncation_bound = crate::walk::return_bound(table.oracle(), cap, soup.base.extent() as u32, escape).ok();
    Ok(soup)
}

/// Uniform sampling on the inner boundary of a base.
#[derive(Clone, Debug)]
enum Boundary {
    Sphere(SphereSampler),
    List(Vec<Point>),
}

impl Boundary {
    fn len(&self) -> u64 {
        match self {
            Boundary::Sphere(s) => s.len(),
            Boundary::List(v) => v.len() as u64,
        }
    }

    fn sample(&self, rng: &mut Stream) -> Point {
        match self {
            Boundary::Sphere(s) => s.sample(rng),
            Boundary::List(v) => v[rng.gen_range(0..v.len())],
        }
    }
}

/// Exact soup sampler that needs no equilibrium solve.
///
/// Each inner-boundary point `x` of `K` receives `Poisson(u)` proposals; a
/// proposal is kept when a walk from `x` leaves the escape ball without
/// returning to `K`, which happens with probability `e_K(x)` up to
/// truncation. Kept starts therefore form a `Poisson(u e_K(x))` field and the
/// accepted walk is exactly a walk conditioned never to return, so it serves
/// as the backward part.
///
/// Stream index 0 draws the number of proposals; index `i + 1` drives
/// proposal `i` (label, start, backward attempt, forward walk in that order).
#[derive(Clone, Debug)]
pub struct ThinningSampler {
    pub base: Base,
    packer: Packer,
    region: Region,
    boundary: Boundary,
    pub u_low: f64,
    pub u_high: f64,
    pub escape: u32,
    pub seed: u64,
}

impl ThinningSampler {
    pub fn new(base: &Base, u_low: f64, u_high: f64, escape: u32, seed: u64) -> Result<Self> {
        check_interval(u_low, u_high)?;
        let packer = Packer::new(base.dim())?;
        check_escape(&packer, base, escape)?;
        let region = base.region(&packer)?;
        let boundary = match base {
            Base::Ball { center, radius } if *radius > 0 => Boundary::Sphere(SphereSampler::new(*center, *radius)),
            _ => Boundary::List(crate::potential::inner_boundary(&base.to_points())),
        };
        Ok(ThinningSampler { base: base.clone(), packer, region, boundary, u_low, u_high, escape, seed })
    }

    /// Number of proposals (a `Poisson(u |∂K|)` draw).
    pub fn proposals(&self) -> Result<u64> {
        poisson_count((self.u_high - self.u_low) * self.boundary.len() as f64, &mut stream(self.seed, Domain::Soup, 0))
    }

    /// Proposal `i`, or `None` when its walk returns to `K`.
    pub fn proposal(&self, i: u64) -> Result<Option<Trajectory>> {
        let mut rng = stream(self.seed, Domain::Soup, i + 1);
        let label = self.u_low + (self.u_high - self.u_low) * rng.gen::<f64>();
        let start = self.boundary.sample(&mut rng);
        let mut keys = Vec::new();
        let escaped = drive(&self.packer, &start, self.escape, &mut rng, DEFAULT_STEP_BUDGET, |t, w| {
            keys.push(w.key());
            t == 0 || !self.region.contains(w)
        })?;
        if !escaped {
            return Ok(None);
        }
        let backward = WalkPath::from_keys(keys, 0, true, self.escape);
        let forward = simulate_forward(&start, self.escape, &mut rng)?;
        Ok(Some(Trajectory::new(label, start, forward, backward)))
    }

    /// Applies `f` to every kept trajectory without holding them all in
    /// memory. Results are in proposal order, tagged with the proposal index.
    pub fn map<T: Send>(&self, f: impl Fn(u64, Trajectory) -> T + Sync) -> Result<Vec<(u64, T)>> {
        let n = self.proposals()?;
        self.map_indices((0..n).collect(), f)
    }

    /// Like [`ThinningSampler::map`], restricted to the given proposals.
    pub fn map_indices<T: Send>(&self, indices: Vec<u64>, f: impl Fn(u64, Trajectory) -> T + Sync) -> Result<Vec<(u64, T)>> {
        let out: Vec<Option<(u64, T)>> = indices
            .into_par_iter()
            .map(|i| Ok(self.proposal(i)?.map(|t| (i, f(i, t)))))
            .collect::<Result<_>>()?;
        Ok(out.into_iter().flatten().collect())
    }

    pub fn soup(&self) -> Result<Soup> {
        let kept = self.map(|_, t| Arc::new(t))?;
        Soup::from_parts(
            self.base.clone(),
            self.u_low,
            self.u_high,
            kept.into_iter().map(|(_, t)| t).collect(),
            self.seed,
            self.escape,
            None,
            Sampler::Thinning,
        )
    }
}

pub fn sample_soup_thinned(base: &Base, u_low: f64, u_high: f64, escape: u32, seed: u64) -> Result<Soup> {
    ThinningSampler::new(base, u_low, u_high, escape, seed)?.soup()
}

/// A base prepared for repeated sampling: the equilibrium solve is done
/// once when `K` is small enough, otherwise soups are thinned.
#[derive(Clone, Debug)]
pub enum SoupSampler {
    Explicit { base: Base, table: PotentialTable },
    Thinning { base: Base },
}

impl SoupSampler {
    pub fn prepare(oracle: &Arc<GreenOracle>, base: &Base) -> Result<Self> {
        if base.len() <= MAX_SET_SIZE as u64 {
            let table = crate::potential::equilibrium(oracle, &base.to_points())?;
            Ok(SoupSampler::Explicit { base: base.clone(), table })
        } else {
            Ok(SoupSampler::Thinning { base: base.clone() })
        }
    }

    pub fn base(&self) -> &Base {
        match self {
            SoupSampler::Explicit { base, .. } | SoupSampler::Thinning { base } => base,
        }
    }

    pub fn capacity(&self) -> Option<f64> {
        match self {
            SoupSampler::Explicit { table, .. } => Some(table.capacity()),
            SoupSampler::Thinning { .. } => None,
        }
    }

    pub fn sample(&self, u_low: f64, u_high: f64, escape: u32, seed: u64) -> Result<Soup> {
        match self {
            SoupSampler::Explicit { base, table } => {
                let mut soup = sample_soup(table, u_low, u_high, escape, seed)?;
                soup.base = base.clone();
                Ok(soup)
            }
            SoupSampler::Thinning { base } => sample_soup_thinned(base, u_low, u_high, escape, seed),
        }
    }
}

use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::analysis::Estimate;
use crate::error::{invalid, Result};
use crate::lattice::Point;
use crate::potential::GreenOracle;
use crate::soup::{Base, Soup, SoupSampler, Trajectory};
use crate::stream::{child_seed, Domain};

use super::VertexWalkFamily;

/// Parameters of [`estimate_composition`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionSetup {
    pub n: usize,
    pub x: Point,
    pub y: Point,
    pub u: f64,
    pub base: Base,
    pub replicas: u64,
    pub seed: u64,
    pub escape: u32,
}

/// Level slabs of the composition of order `n`: `[u(i−1)/n, ui/n]` for
/// `i = 2..n−1`. For `n = 2` the two halves of `[0, u]`.
pub fn slab_bounds(n: usize, u: f64) -> Result<Vec<(f64, f64)>> {
    match n {
        0 | 1 => Err(invalid("n", "composition order must be at least 2")),
        2 => Ok(vec![(0.0, u / 2.0), (u / 2.0, u)]),
        _ => Ok((2..n).map(|i| (u * (i - 1) as f64 / n as f64, u * i as f64 / n as f64)).collect()),
    }
}

/// Frequency of `x C_n y` over independent replicas, with a Wilson interval.
///
/// For `n >= 3` a replica succeeds when the trace of `w_x` reaches the trace
/// of `w_y` through one trajectory from each middle slab in turn. `n = 2`
/// is the two-slab analogue `x M_{0,u/2} M_{u/2,u} y` without vertex walks.
/// Chains are searched among trajectories meeting `base` only.
pub fn estimate_composition(oracle: &Arc<GreenOracle>, setup: &CompositionSetup) -> Result<Estimate> {
    if setup.replicas < 100 {
        return Err(invalid("replicas", "at least 100 replicas are needed for a meaningful interval"));
    }
    if !(setup.u > 0.0) {
        return Err(invalid("u", "intensity must be positive"));
    }
    for p in [&setup.x, &setup.y] {
        if !setup.base.contains(p) {
            return Err(invalid("x", format!("{p:?} is outside the base")));
        }
    }
    let slabs = slab_bounds(setup.n, setup.u)?;
    let sampler = SoupSampler::prepare(oracle, &setup.base)?;
    let hits = (0..setup.replicas)
        .into_par_iter()
        .map(|r| {
            let seed = child_seed(setup.seed, Domain::Replica, r);
            let soup = sampler.sample(0.0, setup.u, setup.escape, seed)?;
            replica_succeeds(setup, &slabs, &soup, seed)
        })
        .collect::<Result<Vec<bool>>>()?;
    Estimate::wilson(hits.iter().filter(|&&h| h).count() as u64, setup.replicas)
}

fn replica_succeeds(setup: &CompositionSetup, slabs: &[(f64, f64)], soup: &Soup, seed: u64) -> Result<bool> {
    let packer = soup.packer();
    let layers: Vec<Soup> = slabs.iter().map(|&(a, b)| soup.slice(a, b)).collect::<Result<_>>()?;
    let (start, end): (FxHashSet<u64>, FxHashSet<u64>) = if setup.n == 2 {
        (std::iter::once(packer.pack(&setup.x)?).collect(), std::iter::once(packer.pack(&setup.y)?).collect())
    } else {
        let mut fam = VertexWalkFamily::new(soup.dim(), seed, setup.escape)?;
        fam.materialize(&setup.x)?;
        fam.materialize(&setup.y)?;
        (fam.trace(&setup.x).cloned().unwrap_or_default(), fam.trace(&setup.y).cloned().unwrap_or_default())
    };
    let mut frontier: Vec<&Arc<Trajectory>> =
        layers[0].trajectories().iter().filter(|t| t.meets_keys(&start)).collect();
    for layer in &layers[1..] {
        if frontier.is_empty() {
            return Ok(false);
        }
        frontier = layer.trajectories().iter().filter(|t| frontier.iter().any(|f| f.meets(t))).collect();
    }
    Ok(frontier.iter().any(|t| t.meets_keys(&end)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_layout() {
        assert_eq!(slab_bounds(3, 3.0).unwrap(), vec![(1.0, 2.0)]);
        assert_eq!(slab_bounds(4, 4.0).unwrap(), vec![(1.0, 2.0), (2.0, 3.0)]);
        assert_eq!(slab_bounds(2, 1.0).unwrap(), vec![(0.0, 0.5), (0.5, 1.0)]);
        assert!(slab_bounds(1, 1.0).is_err());
    }

    #[test]
    fn too_few_replicas_rejected() {
        let oracle = Arc::new(GreenOracle::time_integral(5).unwrap());
        let setup = CompositionSetup {
            n: 3,
            x: Point::origin(5).unwrap(),
            y: Point::origin(5).unwrap(),
            u: 1.0,
            base: Base::ball(5, 1).unwrap(),
            replicas: 99,
            seed: 1,
            escape: 8,
        };
        assert!(estimate_composition(&oracle, &setup).is_err());
    }

    #[test]
    fn coincident_points_connect_often() {
        let oracle = Arc::new(GreenOracle::time_integral(5).unwrap());
        let setup = CompositionSetup {
            n: 3,
            x: Point::origin(5).unwrap(),
            y: Point::origin(5).unwrap(),
            u: 3.0,
            base: Base::ball(5, 2).unwrap(),
            replicas: 100,
            seed: 2,
            escape: 10,
        };
        let est = estimate_composition(&oracle, &setup).unwrap();
        assert!(est.p > 0.0, "{est:?}");
        assert!(est.low <= est.p && est.p <= est.high);
    }
}

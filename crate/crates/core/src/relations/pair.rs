use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Estimate;
use crate::error::{invalid, Result};
use crate::lattice::Point;
use crate::potential::{equilibrium, GreenOracle};
use crate::soup::{sample_soup, Base};
use crate::stream::{child_seed, Domain};

use super::build_incidence;

/// `P[T(0, x) <= m | 0, x ∈ I^u]` over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairChainEstimate {
    pub replicas: u64,
    /// Replicas with both points occupied.
    pub occupied: u64,
    /// `None` when no replica had both points occupied.
    pub estimate: Option<Estimate>,
}

/// Conditional probability that 0 and `x` are joined by a chain of at most
/// `m <= 2` trajectories. Such chains only use trajectories through 0 or
/// `x`, so a soup on `{0, x}` decides the event exactly (up to truncation).
pub fn pair_chain_probability(
    oracle: &Arc<GreenOracle>,
    x: &Point,
    m: u32,
    u: f64,
    replicas: u64,
    seed: u64,
    escape: u32,
) -> Result<PairChainEstimate> {
    if !(1..=2).contains(&m) {
        return Err(invalid("m", "chains through the pair soup decide m <= 2 only"));
    }
    if !(u > 0.0) {
        return Err(invalid("u", "intensity must be positive"));
    }
    let origin = Point::origin(x.dim())?;
    let base = Base::points(&[origin, *x])?;
    let table = equilibrium(oracle, &base.to_points())?;
    let outcomes = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let soup = sample_soup(&table, 0.0, u, escape, child_seed(seed, Domain::Replica, r))?;
            if !soup.occupied(&origin) || !soup.occupied(x) {
                return Ok(None);
            }
            Ok(Some(build_incidence(&soup).chain_distance(&origin, x).is_some_and(|d| d <= m)))
        })
        .collect::<Result<Vec<Option<bool>>>>()?;
    let occupied = outcomes.iter().flatten().count() as u64;
    let hits = outcomes.iter().flatten().filter(|&&h| h).count() as u64;
    let estimate = if occupied == 0 { None } else { Some(Estimate::wilson(hits, occupied)?) };
    Ok(PairChainEstimate { replicas, occupied, estimate })
}

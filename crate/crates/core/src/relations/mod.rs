//! Trajectory relations: incidence graphs, chain distances, vertex walk
//! families and slab compositions.

mod composition;
mod family;
mod ladder;
mod pair;

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{Packer, Point};
use crate::soup::Soup;

pub use composition::{estimate_composition, slab_bounds, CompositionSetup};
pub use family::VertexWalkFamily;
pub use ladder::{connectivity_ladder, Ladder, LadderRow};
pub use pair::{pair_chain_probability, PairChainEstimate};

/// Point ↔ trajectory incidence of a soup plus trajectory adjacency (shared
/// trace point).
#[derive(Clone, Debug)]
pub struct IncidenceGraph {
    packer: Packer,
    index: FxHashMap<u64, Vec<u32>>,
    adjacency: Vec<Vec<u32>>,
}

pub fn build_incidence(soup: &Soup) -> IncidenceGraph {
    let n = soup.len();
    let mut index: FxHashMap<u64, Vec<u32>> = FxHashMap::default();
    for (i, t) in soup.trajectories().iter().enumerate() {
        for &k in t.trace() {
            index.entry(k).or_default().push(i as u32);
        }
    }
    let mut adj: Vec<FxHashSet<u32>> = vec![FxHashSet::default(); n];
    for list in index.values().filter(|l| l.len() > 1) {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                adj[i as usize].insert(j);
                adj[j as usize].insert(i);
            }
        }
    }
    let adjacency = adj
        .into_iter()
        .map(|s| {
            let mut v: Vec<u32> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect();
    IncidenceGraph { packer: *soup.packer(), index, adjacency }
}

impl IncidenceGraph {
    pub fn trajectory_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Trajectories through `p`.
    pub fn covering(&self, p: &Point) -> &[u32] {
        self.packer.pack(p).ok().and_then(|k| self.index.get(&k)).map_or(&[], |v| v.as_slice())
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of distinct points on the traces.
    pub fn point_count(&self) -> usize {
        self.index.len()
    }

    /// Smallest `m` such that trajectories `γ_1, …, γ_m` with `x ∈ γ_1`,
    /// `y ∈ γ_m` and consecutive traces intersecting exist; `None` when no
    /// such chain exists in this soup.
    pub fn chain_distance(&self, x: &Point, y: &Point) -> Option<u32> {
        let sources = self.covering(x);
        let targets: FxHashSet<u32> = self.covering(y).iter().copied().collect();
        if sources.is_empty() || targets.is_empty() {
            return None;
        }
        let mut dist = vec![u32::MAX; self.adjacency.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if targets.contains(&s) {
                return Some(1);
            }
            dist[s as usize] = 1;
            queue.push_back(s);
        }
        while let Some(i) = queue.pop_front() {
            let d = dist[i as usize];
            for &j in &self.adjacency[i as usize] {
                if dist[j as usize] == u32::MAX {
                    if targets.contains(&j) {
                        return Some(d + 1);
                    }
                    dist[j as usize] = d + 1;
                    queue.push_back(j);
                }
            }
        }
        None
    }

    /// Chain distance from `x` to every trajectory (`u32::MAX` when
    /// unreachable); trajectories through `x` are at distance 1.
    pub fn distances_from(&self, x: &Point) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.adjacency.len()];
        let mut queue = VecDeque::new();
        for &s in self.covering(x) {
            dist[s as usize] = 1;
            queue.push_back(s);
        }
        while let Some(i) = queue.pop_front() {
            let d = dist[i as usize];
            for &j in &self.adjacency[i as usize] {
                if dist[j as usize] == u32::MAX {
                    dist[j as usize] = d + 1;
                    queue.push_back(j);
                }
            }
        }
        dist
    }
}

/// Occupied points of a window and how many of their pairs are within each
/// chain distance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCounts {
    pub occupied: u64,
    pub pairs: u64,
    /// `within[m − 1]`: unordered occupied pairs with chain distance `<= m`.
    pub within: Vec<u64>,
}

impl WindowCounts {
    pub fn fraction(&self, m: usize) -> f64 {
        if self.pairs == 0 {
            f64::NAN
        } else {
            self.within[m - 1] as f64 / self.pairs as f64
        }
    }
}

/// Pairwise chain distances (capped at `max_m`) among the occupied points of
/// `window` in one soup.
pub fn window_counts(soup: &Soup, window: &[Point], max_m: u32) -> WindowCounts {
    let g = build_incidence(soup);
    let occupied: Vec<&Point> = window.iter().filter(|p| !g.covering(p).is_empty()).collect();
    let mut within = vec![0u64; max_m as usize];
    let mut pairs = 0;
    for (i, x) in occupied.iter().enumerate() {
        let dist = g.distances_from(x);
        for y in &occupied[i + 1..] {
            pairs += 1;
            let d = g.covering(y).iter().map(|&t| dist[t as usize]).min().unwrap_or(u32::MAX);
            for m in d.max(1)..=max_m {
                within[m as usize - 1] += 1;
            }
        }
    }
    WindowCounts { occupied: occupied.len() as u64, pairs, within }
}

/// Whether one trajectory of `slice(s, t1, t2)` covers both `x` and `y`.
pub fn holds_m(s: &Soup, t1: f64, t2: f64, x: &Point, y: &Point) -> Result<bool> {
    let slice = s.slice(t1, t2)?;
    let (Ok(kx), Ok(ky)) = (s.packer().pack(x), s.packer().pack(y)) else {
        return Ok(false);
    };
    Ok(slice.trajectories().iter().any(|t| t.covers(kx) && t.covers(ky)))
}

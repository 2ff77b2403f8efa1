use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{Ball, Packer};
use crate::soup::{Base, ThinningSampler};

/// Connectivity of occupied window pairs for one base radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub base_radius: u32,
    /// Trajectories of the soup on this base.
    pub trajectories: u64,
    pub pairs: u64,
    /// Pairs with chain distance `<= 1`, `<= 2` and `<= 3`.
    pub within: [u64; 3],
}

impl LadderRow {
    pub fn fraction(&self, m: usize) -> f64 {
        if self.pairs == 0 {
            f64::NAN
        } else {
            self.within[m - 1] as f64 / self.pairs as f64
        }
    }
}

/// Result of [`connectivity_ladder`] for one soup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub occupied: u64,
    pub window_trajectories: u64,
    pub rows: Vec<LadderRow>,
}

/// Chain distances (up to 3) between occupied points of the window ball
/// `B(0, window)` in soups on the nested bases `B(0, R)`, `R` in `radii`.
///
/// One thinned soup on the largest base is sampled; the soup on a smaller
/// base `B(0, R)` is the set of its trajectories that come within `R` of the
/// origin, so the ladder is monotone by construction. Every trajectory keeps
/// the escape radius of the largest base.
///
/// Window trajectories are kept in memory; the others are streamed twice
/// (once to find the window trajectories, once more by proposal index to
/// record which window trajectories each of them meets).
pub fn connectivity_ladder(dim: usize, window: u32, radii: &[u32], u: f64, escape: u32, seed: u64) -> Result<Ladder> {
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    let &largest = radii.last().ok_or_else(|| invalid("radii", "empty base ladder"))?;
    if radii[0] < window {
        return Err(invalid("radii", "every base must contain the window"));
    }
    let packer = Packer::new(dim)?;
    let sampler = ThinningSampler::new(&Base::ball(dim, largest)?, 0.0, u, escape, seed)?;
    let norm = |k: u64| packer.unpack(k).l1_norm();

    // pass 1: minimum norms, window traces
    let first = sampler.map(|_, t| {
        let m = t.trace().iter().map(|&k| norm(k)).min().unwrap_or(0);
        let trace = if m <= window as u64 { Some(t.trace().clone()) } else { None };
        (m, trace)
    })?;
    let mut min_norm: Vec<(u64, u64)> = Vec::with_capacity(first.len());
    let mut window_traces = Vec::new();
    for (i, (m, trace)) in first {
        min_norm.push((i, m));
        if let Some(tr) = trace {
            window_traces.push(tr);
        }
    }
    let nw = window_traces.len();
    let mut index: FxHashMap<u64, Vec<u32>> = FxHashMap::default();
    for (w, tr) in window_traces.iter().enumerate() {
        for &k in tr {
            index.entry(k).or_default().push(w as u32);
        }
    }

    // pass 2: which window trajectories each trajectory meets
    let idx: Vec<u64> = min_norm.iter().map(|p| p.0).collect();
    let bridges = sampler.map_indices(idx, |_, t| {
        let mut met: Vec<u32> = t.trace().iter().filter_map(|k| index.get(k)).flatten().copied().collect();
        met.sort_unstable();
        met.dedup();
        met
    })?;

    // occupied window points and the window trajectories through them
    let ball = Ball::centered(dim, window)?;
    let mut occupied: Vec<Vec<u32>> = Vec::new();
    for p in ball.points() {
        if let Some(list) = index.get(&packer.pack(&p)?) {
            let mut l = list.clone();
            l.sort_unstable();
            l.dedup();
            occupied.push(l);
        }
    }

    let words = nw.div_ceil(64).max(1);
    let mut adj = vec![vec![0u64; words]; nw];
    for a in 0..nw {
        for b in 0..nw {
            if window_meets(&window_traces, a, b) {
                adj[a][b / 64] |= 1 << (b % 64);
            }
        }
    }
    let mut rows = Vec::new();
    for &r in &radii {
        // two[a][b]: some trajectory of this base meets both a and b
        let mut two = vec![vec![0u64; words]; nw];
        let mut count = 0u64;
        for ((_, m), (_, met)) in min_norm.iter().zip(&bridges) {
            if *m > r as u64 {
                continue;
            }
            count += 1;
            for &a in met {
                for &b in met {
                    two[a as usize][b as usize / 64] |= 1 << (b % 64);
                }
            }
        }
        let mut within = [0u64; 3];
        let mut pairs = 0u64;
        for i in 0..occupied.len() {
            for j in i + 1..occupied.len() {
                pairs += 1;
                let (x, y) = (&occupied[i], &occupied[j]);
                let d1 = x.iter().any(|a| y.binary_search(a).is_ok());
                let hit = |m: &Vec<Vec<u64>>| x.iter().any(|&a| y.iter().any(|&b| m[a as usize][b as usize / 64] >> (b % 64) & 1 == 1));
                let d2 = d1 || hit(&adj);
                let d3 = d2 || hit(&two);
                within[0] += d1 as u64;
                within[1] += d2 as u64;
                within[2] += d3 as u64;
            }
        }
        rows.push(LadderRow { base_radius: r, trajectories: count, pairs, within });
    }
    Ok(Ladder { occupied: occupied.len() as u64, window_trajectories: nw as u64, rows })
}

fn window_meets(traces: &[rustc_hash::FxHashSet<u64>], a: usize, b: usize) -> bool {
    let (s, l) = if traces[a].len() <= traces[b].len() { (&traces[a], &traces[b]) } else { (&traces[b], &traces[a]) };
    s.iter().any(|k| l.contains(k))
}

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{invalid, Result};
use crate::lattice::{Packer, Point};
use crate::stream::{stream, Domain};
use crate::walk::{simulate_forward, WalkPath};

/// Independent forward walks `w_x`, one per vertex, materialized on demand.
///
/// The walk at `x` is driven by the `walk-family` stream whose index is the
/// packed key of `x`, so it does not depend on the order of materialization.
#[derive(Clone, Debug)]
pub struct VertexWalkFamily {
    packer: Packer,
    pub seed: u64,
    pub escape_radius: u32,
    walks: FxHashMap<u64, (WalkPath, FxHashSet<u64>)>,
}

impl VertexWalkFamily {
    pub fn new(dim: usize, seed: u64, escape_radius: u32) -> Result<Self> {
        let packer = Packer::new(dim)?;
        packer.check_radius(escape_radius as u64)?;
        Ok(VertexWalkFamily { packer, seed, escape_radius, walks: FxHashMap::default() })
    }

    pub fn materialize(&mut self, x: &Point) -> Result<&WalkPath> {
        let key = self.packer.pack(x)?;
        if !self.walks.contains_key(&key) {
            let path = simulate_forward(x, self.escape_radius, &mut stream(self.seed, Domain::WalkFamily, key))?;
            let trace = path.keys().iter().copied().collect();
            self.walks.insert(key, (path, trace));
        }
        Ok(&self.walks[&key].0)
    }

    pub fn walk(&self, x: &Point) -> Option<&WalkPath> {
        self.entry(x).map(|(w, _)| w)
    }

    pub fn trace(&self, x: &Point) -> Option<&FxHashSet<u64>> {
        self.entry(x).map(|(_, t)| t)
    }

    fn entry(&self, x: &Point) -> Option<&(WalkPath, FxHashSet<u64>)> {
        self.packer.pack(x).ok().and_then(|k| self.walks.get(&k))
    }

    fn require(&self, x: &Point) -> Result<&FxHashSet<u64>> {
        self.trace(x).ok_or_else(|| invalid("x", format!("walk at {x:?} not materialized")))
    }

    /// `y ∈ range(w_x)`.
    pub fn holds_l(&self, x: &Point, y: &Point) -> Result<bool> {
        let t = self.require(x)?;
        Ok(self.packer.pack(y).is_ok_and(|k| t.contains(&k)))
    }

    /// `x ∈ range(w_y)`.
    pub fn holds_r(&self, x: &Point, y: &Point) -> Result<bool> {
        self.holds_l(y, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_is_reflexive_and_r_mirrors_l() {
        let mut f = VertexWalkFamily::new(5, 4, 10).unwrap();
        let x = Point::axis(5, 0, 2).unwrap();
        let y = Point::origin(5).unwrap();
        assert!(f.holds_l(&x, &x).is_err());
        f.materialize(&x).unwrap();
        f.materialize(&y).unwrap();
        assert!(f.holds_l(&x, &x).unwrap());
        assert_eq!(f.holds_l(&x, &y).unwrap(), f.holds_r(&y, &x).unwrap());
    }

    #[test]
    fn walks_do_not_depend_on_materialization_order() {
        let pts: Vec<Point> = (0..4).map(|i| Point::axis(4, 1, i).unwrap()).collect();
        let mut a = VertexWalkFamily::new(4, 8, 9).unwrap();
        let mut b = VertexWalkFamily::new(4, 8, 9).unwrap();
        for p in &pts {
            a.materialize(p).unwrap();
        }
        for p in pts.iter().rev() {
            b.materialize(p).unwrap();
        }
        for p in &pts {
            assert_eq!(a.walk(p), b.walk(p));
        }
        assert_ne!(a.walk(&pts[0]), a.walk(&pts[1]));
    }
}

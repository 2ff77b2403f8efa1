//! Geometry of `Z^d`: points, the ℓ1 metric, balls and the tree spread.

mod pack;
mod spread;
mod symmetry;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pack::Packer;
pub use spread::{prufer_decode, prufer_trees, spread};
pub use symmetry::{
    balanced_tuple, canonical_key, canonical_tuple, orbit_points, orbit_size, random_symmetry, SphereSampler,
};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 8;
/// Smallest supported lattice dimension (transience).
pub const MIN_DIM: usize = 3;

/// Checks that `d` lies in the supported range.
pub fn check_dim(d: usize) -> Result<usize> {
    if (MIN_DIM..=MAX_DIM).contains(&d) {
        Ok(d)
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// A point of `Z^d`, `3 <= d <= 8`.
///
/// Points are small `Copy` values; large collections of points (walk paths,
/// traces) are stored as packed `u64` keys instead, see [`Packer`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i32]) -> Result<Self> {
        let d = check_dim(coords.len())?;
        let mut c = [0; MAX_DIM];
        c[..d].copy_from_slice(coords);
        Ok(Point { dim: d as u8, coords: c })
    }

    pub(crate) fn from_array(dim: usize, coords: [i32; MAX_DIM]) -> Self {
        debug_assert!(coords[dim..].iter().all(|&c| c == 0));
        Point { dim: dim as u8, coords }
    }

    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Point { dim: dim as u8, coords: [0; MAX_DIM] })
    }

    /// `k · e_axis`.
    pub fn axis(dim: usize, axis: usize, k: i32) -> Result<Self> {
        let mut p = Point::origin(dim)?;
        if axis >= dim {
            return Err(crate::error::invalid("axis", format!("{axis} >= d={dim}")));
        }
        p.coords[axis] = k;
        Ok(p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[i32; MAX_DIM] {
        &self.coords
    }

    #[inline]
    pub fn l1_norm(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn offset(&self, other: &Point) -> Result<Point> {
        same_dim(self, other)?;
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a += *b;
        }
        Ok(Point { dim: self.dim, coords: c })
    }

    /// `self - other`.
    pub fn displacement(&self, other: &Point) -> Result<Point> {
        same_dim(self, other)?;
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a -= *b;
        }
        Ok(Point { dim: self.dim, coords: c })
    }

    /// The `2d` nearest neighbours, in the order `+e_0, -e_0, +e_1, ...`.
    pub fn neighbors(&self) -> impl Iterator<Item = Point> + '_ {
        (0..2 * self.dim()).map(move |dir| {
            let mut c = self.coords;
            c[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
            Point { dim: self.dim, coords: c }
        })
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

fn same_dim(x: &Point, y: &Point) -> Result<()> {
    if x.dim == y.dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: x.dim(), right: y.dim() })
    }
}

/// `‖x − y‖₁`.
pub fn l1_dist(x: &Point, y: &Point) -> Result<u64> {
    same_dim(x, y)?;
    Ok(x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs())
        .sum())
}

/// `⟨xy⟩ = 1 + |x − y|`.
pub fn gauge(x: &Point, y: &Point) -> Result<u64> {
    Ok(1 + l1_dist(x, y)?)
}

/// Closed ℓ1 ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: u32,
}

impl Ball {
    pub fn new(center: Point, radius: u32) -> Self {
        Ball { center, radius }
    }

    pub fn centered(dim: usize, radius: u32) -> Result<Self> {
        Ok(Ball { center: Point::origin(dim)?, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    #[inline]
    pub fn contains(&self, y: &Point) -> bool {
        match l1_dist(&self.center, y) {
            Ok(r) => r <= self.radius as u64,
            Err(_) => false,
        }
    }

    /// Number of lattice points at ℓ1 distance exactly `r` from a point of `Z^d`.
    pub fn sphere_size(dim: usize, r: u32) -> u64 {
        if r == 0 {
            return 1;
        }
        // sum_k 2^k C(d,k) C(r-1,k-1)
        (1..=dim.min(r as usize))
            .map(|k| (1u64 << k) * binom(dim as u64, k as u64) * binom(r as u64 - 1, k as u64 - 1))
            .sum()
    }

    pub fn volume(&self) -> u64 {
        (0..=self.radius).map(|r| Ball::sphere_size(self.dim(), r)).sum()
    }

    /// Points with `|y − center| == r`, in lexicographic order.
    pub fn sphere_points(&self, r: u32) -> Vec<Point> {
        let d = self.dim();
        let mut out = Vec::new();
        let mut cur = [0i32; MAX_DIM];
        fill_sphere(d, 0, r as i32, &mut cur, &mut out);
        out.iter_mut()
            .for_each(|p| *p = p.offset(&self.center).expect("same dimension"));
        out
    }

    /// The points with a neighbour outside the ball (the outer sphere).
    pub fn inner_boundary(&self) -> Vec<Point> {
        self.sphere_points(self.radius)
    }

    /// All points of the ball, sphere by sphere.
    pub fn points(&self) -> Vec<Point> {
        (0..=self.radius).flat_map(|r| self.sphere_points(r)).collect()
    }
}

fn fill_sphere(d: usize, i: usize, left: i32, cur: &mut [i32; MAX_DIM], out: &mut Vec<Point>) {
    if i == d - 1 {
        for v in if left == 0 { vec![0] } else { vec![-left, left] } {
            cur[i] = v;
            out.push(Point::from_array(d, *cur));
        }
        cur[i] = 0;
        return;
    }
    for v in -left..=left {
        cur[i] = v;
        fill_sphere(d, i + 1, left - v.abs(), cur, out);
    }
    cur[i] = 0;
}

pub(crate) fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

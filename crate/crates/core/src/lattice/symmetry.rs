//! The hyperoctahedral group (coordinate permutations and sign flips), under
//! which the walk, the Green function and every centered ball are invariant.

use rand::Rng;

use crate::error::{Error, Result};

use super::{Point, MAX_DIM};

/// Sorted absolute values, largest first; a canonical orbit representative.
pub fn canonical_tuple(p: &Point) -> [u32; MAX_DIM] {
    let d = p.dim();
    let mut t = [0u32; MAX_DIM];
    for (slot, c) in t.iter_mut().zip(p.coords()) {
        *slot = c.unsigned_abs();
    }
    t[..d].sort_unstable_by(|a, b| b.cmp(a));
    t
}

/// Injective `u64` key of the orbit of `p` (for a fixed dimension).
pub fn canonical_key(p: &Point) -> Result<u64> {
    let d = p.dim();
    let bits = 64 / d as u32;
    let t = canonical_tuple(p);
    if t[0] as u64 >= 1u64 << bits {
        return Err(Error::PackingOverflow { coord: t[0] as i64, bits, dim: d });
    }
    Ok(t[..d].iter().fold(0u64, |k, &v| (k << bits) | v as u64))
}

/// Size of the orbit of a canonical tuple.
pub fn orbit_size(tuple: &[u32]) -> u64 {
    let d = tuple.len() as u64;
    let mut size: u64 = (1..=d).product();
    let mut sorted = tuple.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        size /= (1..=j as u64).product::<u64>();
        i += j;
    }
    size << tuple.iter().filter(|&&v| v != 0).count()
}

/// Every image of `p` under coordinate permutations and sign flips, sorted
/// and without repeats.
pub fn orbit_points(p: &Point) -> Vec<Point> {
    fn rec(d: usize, i: usize, left: &mut Vec<i32>, cur: &mut [i32; MAX_DIM], out: &mut Vec<Point>) {
        if i == d {
            out.push(Point::from_array(d, *cur));
            return;
        }
        for j in 0..left.len() {
            if left[..j].contains(&left[j]) {
                continue;
            }
            let v = left.remove(j);
            for s in if v == 0 { vec![0] } else { vec![v, -v] } {
                cur[i] = s;
                rec(d, i + 1, left, cur, out);
            }
            left.insert(j, v);
        }
        cur[i] = 0;
    }
    let d = p.dim();
    let mut left: Vec<i32> = canonical_tuple(p)[..d].iter().map(|&v| v as i32).collect();
    let mut out = Vec::new();
    rec(d, 0, &mut left, &mut [0; MAX_DIM], &mut out);
    out.sort();
    out.dedup();
    out
}

/// Applies a uniformly random permutation and sign pattern to `p`.
pub fn random_symmetry<R: Rng + ?Sized>(p: &Point, rng: &mut R) -> Point {
    let d = p.dim();
    let mut c = *p.raw();
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        c.swap(i, j);
    }
    let signs = rng.next_u32();
    for (i, v) in c.iter_mut().enumerate().take(d) {
        if signs >> i & 1 == 1 {
            *v = -*v;
        }
    }
    Point::from_array(d, c)
}

/// The point of ℓ1 norm `n` closest to the diagonal: `n` spread as evenly as
/// possible over the coordinates. For a fixed ℓ1 norm it has the smallest
/// Euclidean norm, hence the largest Green function value.
pub fn balanced_tuple(dim: usize, n: u32) -> Result<Point> {
    let mut c = [0i32; MAX_DIM];
    let q = (n / dim as u32) as i32;
    let r = (n % dim as u32) as usize;
    for (i, v) in c.iter_mut().enumerate().take(dim) {
        *v = q + i32::from(i < r);
    }
    Point::new(&c[..dim])
}

/// Canonical tuples of ℓ1 norm `r` in dimension `d`.
pub(crate) fn sphere_orbits(dim: usize, r: u32) -> Vec<[u32; MAX_DIM]> {
    fn rec(dim: usize, i: usize, left: u32, cap: u32, cur: &mut [u32; MAX_DIM], out: &mut Vec<[u32; MAX_DIM]>) {
        if i == dim {
            if left == 0 {
                out.push(*cur);
            }
            return;
        }
        // remaining slots can absorb at most cap each
        if left as u64 > cap as u64 * (dim - i) as u64 {
            return;
        }
        for v in (0..=cap.min(left)).rev() {
            cur[i] = v;
            rec(dim, i + 1, left - v, v, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    rec(dim, 0, r, r, &mut [0; MAX_DIM], &mut out);
    out
}

/// Uniform sampling on the ℓ1 sphere `{ |y − center| = r }` without
/// enumerating it: pick an orbit with probability proportional to its size,
/// then a random symmetry of its representative.
#[derive(Clone, Debug)]
pub struct SphereSampler {
    dim: usize,
    center: Point,
    reps: Vec<[u32; MAX_DIM]>,
    cumulative: Vec<u64>,
}

impl SphereSampler {
    pub fn new(center: Point, r: u32) -> Self {
        let dim = center.dim();
        let reps = sphere_orbits(dim, r);
        let mut acc = 0;
        let cumulative = reps
            .iter()
            .map(|t| {
                acc += orbit_size(&t[..dim]);
                acc
            })
            .collect();
        SphereSampler { dim, center, reps, cumulative }
    }

    /// Number of points on the sphere.
    pub fn len(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let k = rng.gen_range(0..self.len());
        let i = self.cumulative.partition_point(|&c| c <= k);
        let mut c = [0i32; MAX_DIM];
        for (slot, v) in c.iter_mut().zip(&self.reps[i][..self.dim]) {
            *slot = *v as i32;
        }
        let p = random_symmetry(&Point::from_array(self.dim, c), rng);
        p.offset(&self.center).expect("same dimension")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Ball;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::collections::HashMap;

    #[test]
    fn orbit_sizes_sum_to_sphere() {
        for d in 3..=6 {
            for r in 0..8 {
                let total: u64 = sphere_orbits(d, r).iter().map(|t| orbit_size(&t[..d])).sum();
                assert_eq!(total, Ball::sphere_size(d, r));
            }
        }
    }

    #[test]
    fn orbit_matches_enumeration() {
        let ball = Ball::centered(4, 0).unwrap();
        let mut counts: HashMap<[u32; MAX_DIM], u64> = HashMap::new();
        for p in ball.sphere_points(5) {
            *counts.entry(canonical_tuple(&p)).or_default() += 1;
        }
        for (t, n) in counts {
            assert_eq!(orbit_size(&t[..4]), n);
        }
    }

    #[test]
    fn orbit_points_have_orbit_size() {
        for c in [[3, -1, 0, 2, 0], [2, 2, 1, 1, 1], [0, 0, 0, 0, 0], [4, 0, 0, 0, 0]] {
            let p = Point::new(&c).unwrap();
            let orbit = orbit_points(&p);
            assert_eq!(orbit.len() as u64, orbit_size(&canonical_tuple(&p)[..5]));
            assert!(orbit.contains(&p));
            assert!(orbit.iter().all(|q| canonical_tuple(q) == canonical_tuple(&p)));
        }
    }

    #[test]
    fn canonical_keys_identify_orbits() {
        let a = Point::new(&[3, -1, 0, 2, 0]).unwrap();
        let b = Point::new(&[0, 2, -3, 0, 1]).unwrap();
        let c = Point::new(&[0, 2, -3, 0, 2]).unwrap();
        assert_eq!(canonical_key(&a).unwrap(), canonical_key(&b).unwrap());
        assert_ne!(canonical_key(&a).unwrap(), canonical_key(&c).unwrap());
    }

    #[test]
    fn balanced() {
        assert_eq!(balanced_tuple(5, 24).unwrap().coords(), &[5, 5, 5, 5, 4]);
        assert_eq!(balanced_tuple(5, 24).unwrap().l1_norm(), 24);
    }

    #[test]
    fn sphere_sampler_is_uniform() {
        let s = SphereSampler::new(Point::origin(3).unwrap(), 2);
        assert_eq!(s.len(), 18);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let mut counts: HashMap<Point, u64> = HashMap::new();
        let n = 180_000;
        for _ in 0..n {
            let p = s.sample(&mut rng);
            assert_eq!(p.l1_norm(), 2);
            *counts.entry(p).or_default() += 1;
        }
        assert_eq!(counts.len(), 18);
        let expected = n as f64 / 18.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 17 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 40.8, "chi2 = {chi2}");
    }
}

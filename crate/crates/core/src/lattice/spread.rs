use crate::error::{Error, Result};

use super::{gauge, Point};

/// Largest set handled by [`spread`]; `6^4 = 1296` trees.
pub const MAX_SPREAD_SIZE: usize = 6;

/// Decodes a Prüfer sequence over `0..n` (length `n − 2`) into the edge list
/// of its labeled tree.
pub fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    debug_assert_eq!(seq.len() + 2, n);
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// All labeled trees on `n >= 2` vertices, as edge lists.
pub fn prufer_trees(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    assert!(n >= 2);
    let len = n - 2;
    let total = n.pow(len as u32);
    (0..total).map(move |mut code| {
        let mut seq = vec![0; len];
        for slot in seq.iter_mut() {
            *slot = code % n;
            code /= n;
        }
        prufer_decode(&seq, n)
    })
}

/// `⟨W⟩`: the minimum over labeled trees on `W` of the product of edge gauges.
///
/// Duplicate points are merged first, `W` being a set.
pub fn spread(points: &[Point]) -> Result<u64> {
    let mut w: Vec<Point> = points.to_vec();
    w.sort();
    w.dedup();
    match w.len() {
        0 => return Err(Error::EmptySet),
        1 => return Ok(1),
        n if n > MAX_SPREAD_SIZE => {
            return Err(Error::UnsupportedSize { size: n, max: MAX_SPREAD_SIZE })
        }
        _ => {}
    }
    let n = w.len();
    let mut g = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = gauge(&w[i], &w[j])?;
        }
    }
    Ok(prufer_trees(n)
        .map(|edges| edges.iter().map(|&(a, b)| g[a * n + b]).product::<u64>())
        .min()
        .expect("at least one tree"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn e1(k: i32) -> Point {
        Point::axis(3, 0, k).unwrap()
    }

    #[test]
    fn tree_counts() {
        for n in 2..=6 {
            let trees: BTreeSet<Vec<(usize, usize)>> = prufer_trees(n)
                .map(|t| {
                    let mut t: Vec<_> = t.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
                    t.sort();
                    t
                })
                .collect();
            assert_eq!(trees.len(), n.pow(n as u32 - 2));
        }
    }

    #[test]
    fn examples() {
        assert_eq!(spread(&[e1(7)]).unwrap(), 1);
        assert_eq!(spread(&[e1(0), e1(2)]).unwrap(), 3);
        // trees: path 0-1-3 (2*3), path 1-0-3 (2*4), path 0-3-1 (4*3)
        assert_eq!(spread(&[e1(0), e1(1), e1(3)]).unwrap(), 6);
    }

    #[test]
    fn size_limits() {
        assert!(matches!(spread(&[]), Err(Error::EmptySet)));
        let seven: Vec<Point> = (0..7).map(e1).collect();
        assert!(matches!(spread(&seven), Err(Error::UnsupportedSize { .. })));
        // duplicates collapse before the size check
        let dup: Vec<Point> = (0..8).map(|i| e1(i % 2)).collect();
        assert_eq!(spread(&dup).unwrap(), 2);
    }

    fn pt() -> impl Strategy<Value = Point> {
        proptest::collection::vec(-6i32..=6, 4).prop_map(|c| Point::new(&c).unwrap())
    }

    proptest! {
        #[test]
        fn pair_spread_is_gauge(a in pt(), b in pt()) {
            prop_assume!(a != b);
            prop_assert_eq!(spread(&[a, b]).unwrap(), gauge(&a, &b).unwrap());
            prop_assert_eq!(gauge(&a, &b).unwrap(), gauge(&b, &a).unwrap());
        }

        #[test]
        fn pushing_a_point_away_never_decreases(w in proptest::collection::vec(pt(), 3..=4), k in 1i32..5) {
            // scaling one point away from the rest along a coordinate with a
            // common sign keeps every pairwise gauge non-decreasing
            let mut w = w;
            w.sort();
            w.dedup();
            prop_assume!(w.len() >= 3);
            let base = spread(&w).unwrap();
            let mut far = w.clone();
            let min0 = w.iter().map(|p| p.coords()[0]).min().unwrap();
            let idx = w.iter().position(|p| p.coords()[0] == min0).unwrap();
            let mut c = far[idx].coords().to_vec();
            c[0] -= k;
            far[idx] = Point::new(&c).unwrap();
            for i in 0..w.len() {
                for j in 0..w.len() {
                    prop_assert!(gauge(&far[i], &far[j]).unwrap() >= gauge(&w[i], &w[j]).unwrap());
                }
            }
            prop_assert!(spread(&far).unwrap() >= base);
        }
    }
}

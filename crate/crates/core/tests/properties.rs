use proptest::prelude::*;
use rustc_hash::FxHashSet;

use ri_core::lattice::{Packer, Point};
use ri_core::relations::build_incidence;
use ri_core::soup::{sample_soup_thinned, Base, Soup};

fn soup(seed: u64, u: f64) -> Soup {
    sample_soup_thinned(&Base::ball(3, 1).unwrap(), 0.0, u, 3, seed).unwrap()
}

/// Chain distance by relaxing `dist[j] <= dist[i] + 1` over all pairs until
/// nothing changes.
fn relaxed(s: &Soup, x: u64, y: u64) -> Option<u32> {
    let ts = s.trajectories();
    let mut dist: Vec<u32> = ts.iter().map(|t| if t.covers(x) { 1 } else { u32::MAX }).collect();
    loop {
        let mut changed = false;
        for i in 0..ts.len() {
            for j in 0..ts.len() {
                if dist[i] != u32::MAX && dist[i] + 1 < dist[j] && ts[i].meets(&ts[j]) {
                    dist[j] = dist[i] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    ts.iter().zip(&dist).filter(|(t, _)| t.covers(y)).map(|(_, &d)| d).filter(|&d| d != u32::MAX).min()
}

fn keys(s: &Soup) -> Vec<u64> {
    let mut k: Vec<u64> = s.trajectories().iter().flat_map(|t| t.trace().iter().copied()).collect::<FxHashSet<_>>().into_iter().collect();
    k.sort_unstable();
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_distance_is_symmetric_and_matches_relaxation(seed in 0u64..10_000, u in 0.5f64..4.0, i in 0usize..1000, j in 0usize..1000) {
        let s = soup(seed, u);
        let k = keys(&s);
        prop_assume!(!k.is_empty());
        let p = s.packer();
        let (x, y) = (k[i % k.len()], k[j % k.len()]);
        let g = build_incidence(&s);
        let d = g.chain_distance(&p.unpack(x), &p.unpack(y));
        prop_assert_eq!(d, g.chain_distance(&p.unpack(y), &p.unpack(x)));
        prop_assert_eq!(d, relaxed(&s, x, y));
        if x == y {
            prop_assert_eq!(d, Some(1));
        }
    }

    #[test]
    fn slices_are_nested(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = soup(seed, 2.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let inner = s.slice(2.0 * lo, 2.0 * hi).unwrap();
        prop_assert!(inner.len() <= s.len());
        for t in inner.trajectories() {
            prop_assert!(t.label >= 2.0 * lo && t.label <= 2.0 * hi);
        }
    }

    #[test]
    fn packing_round_trips(c in prop::collection::vec(-100i32..100, 5)) {
        let p = Packer::new(5).unwrap();
        let x = Point::new(&c).unwrap();
        prop_assert_eq!(p.unpack(p.pack(&x).unwrap()), x);
    }
}

use std::sync::RwLock;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{canonical_key, canonical_tuple, check_dim, Point, MAX_DIM};

use super::absorbing_box::{box_green, BoxConfig, BoxEstimate};
use super::time_integral::{green_values, TimeIntegralConfig};

/// How Green function values are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GreenMethod {
    TimeIntegral(TimeIntegralConfig),
    /// Computes every displacement of ℓ1 norm `<= extent` up front; farther
    /// displacements are rejected.
    AbsorbingBox { config: BoxConfig, extent: u32 },
}

/// Summary of the box extrapolation behind an absorbing-box oracle.
#[derive(Clone, Debug, Serialize)]
pub struct BoxDiagnostics {
    pub radii: Vec<u32>,
    pub change: f64,
    pub harmonic_residual: f64,
}

/// `G(x)`, the expected number of visits to `x` by the walk from `0`.
///
/// Values are cached by orbit under coordinate permutations and sign flips.
/// The cache takes concurrent readers; misses are computed outside the lock.
pub struct GreenOracle {
    dim: usize,
    method: GreenMethod,
    cache: RwLock<FxHashMap<u64, f64>>,
    diagnostics: Option<BoxDiagnostics>,
}

impl std::fmt::Debug for GreenOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenOracle").field("dim", &self.dim).field("method", &self.method).finish()
    }
}

impl GreenOracle {
    pub fn new(dim: usize, method: GreenMethod) -> Result<Self> {
        check_dim(dim)?;
        let mut cache = FxHashMap::default();
        let mut diagnostics = None;
        match &method {
            GreenMethod::TimeIntegral(cfg) => cfg.validate()?,
            GreenMethod::AbsorbingBox { config, extent } => {
                let BoxEstimate { values, radii, change, harmonic_residual } = box_green(dim, *extent, config)?;
                for (t, v) in values {
                    cache.insert(tuple_key(dim, &t), v);
                }
                diagnostics = Some(BoxDiagnostics { radii, change, harmonic_residual });
            }
        }
        Ok(GreenOracle { dim, method, cache: RwLock::new(cache), diagnostics })
    }

    /// Time-integral oracle with default accuracy.
    pub fn time_integral(dim: usize) -> Result<Self> {
        GreenOracle::new(dim, GreenMethod::TimeIntegral(TimeIntegralConfig::default()))
    }

    /// Absorbing-box oracle covering displacements of ℓ1 norm `<= extent`.
    pub fn absorbing_box(dim: usize, extent: u32) -> Result<Self> {
        GreenOracle::new(dim, GreenMethod::AbsorbingBox { config: BoxConfig::for_dim(dim), extent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn method(&self) -> &GreenMethod {
        &self.method
    }

    pub fn box_diagnostics(&self) -> Option<&BoxDiagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn green(&self, x: &Point) -> Result<f64> {
        Ok(self.green_many(std::slice::from_ref(x))?[0])
    }

    /// Batch evaluation; cache misses share one quadrature pass.
    pub fn green_many(&self, xs: &[Point]) -> Result<Vec<f64>> {
        let mut keys = Vec::with_capacity(xs.len());
        for x in xs {
            if x.dim() != self.dim {
                return Err(Error::DimensionMismatch { left: x.dim(), right: self.dim });
            }
            keys.push(canonical_key(x)?);
        }
        let mut missing: FxHashMap<u64, [u32; MAX_DIM]> = FxHashMap::default();
        {
            let cache = self.cache.read().expect("cache lock");
            for (x, k) in xs.iter().zip(&keys) {
                if !cache.contains_key(k) {
                    missing.entry(*k).or_insert_with(|| canonical_tuple(x));
                }
            }
        }
        if !missing.is_empty() {
            let (ks, tuples): (Vec<u64>, Vec<[u32; MAX_DIM]>) = missing.into_iter().unzip();
            let values = match &self.method {
                GreenMethod::TimeIntegral(cfg) => green_values(self.dim, &tuples, cfg)?,
                GreenMethod::AbsorbingBox { extent, .. } => {
                    return Err(invalid(
                        "x",
                        format!("displacement {:?} outside the box oracle's extent {extent}", &tuples[0][..self.dim]),
                    ))
                }
            };
            let mut cache = self.cache.write().expect("cache lock");
            for (k, v) in ks.into_iter().zip(values) {
                cache.insert(k, v);
            }
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(keys.iter().map(|k| cache[k]).collect())
    }

    /// Largest `G` over displacements with ℓ1 norm at least `n`, attained on
    /// the most balanced point of norm `n`.
    pub fn max_beyond(&self, n: u32) -> Result<f64> {
        self.green(&crate::lattice::balanced_tuple(self.dim, n)?)
    }
}

fn tuple_key(dim: usize, t: &[u32; MAX_DIM]) -> u64 {
    let bits = 64 / dim as u32;
    t[..dim].iter().fold(0u64, |k, &v| (k << bits) | v as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_under_the_hyperoctahedral_group() {
        let g = GreenOracle::time_integral(4).unwrap();
        let a = g.green(&Point::new(&[2, -1, 0, 3]).unwrap()).unwrap();
        let b = g.green(&Point::new(&[0, 3, 1, -2]).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(g.green(&Point::origin(4).unwrap()).unwrap() > 1.0);
    }

    #[test]
    fn dimension_checked() {
        let g = GreenOracle::time_integral(5).unwrap();
        assert!(g.green(&Point::origin(3).unwrap()).is_err());
    }

    #[test]
    fn tuple_key_matches_canonical_key() {
        let p = Point::new(&[0, -4, 2, 2, 1]).unwrap();
        assert_eq!(tuple_key(5, &canonical_tuple(&p)), canonical_key(&p).unwrap());
    }
}

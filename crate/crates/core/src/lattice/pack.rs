use crate::error::{Error, Result};

use super::{check_dim, Point, MAX_DIM};

/// Packs a point of `Z^d` into a single `u64`.
///
/// Each axis gets `64 / d` bits holding `coord + 2^(bits-1)`. Within the
/// representable range, a unit step along axis `i` adds or subtracts
/// [`Packer::stride`]`(i)` to the key, which is what the walk engine relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packer {
    dim: usize,
    bits: u32,
}

impl Packer {
    pub fn new(dim: usize) -> Result<Self> {
        let dim = check_dim(dim)?;
        Ok(Packer { dim, bits: 64 / dim as u32 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Largest `|coordinate|` that can be packed.
    pub fn limit(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Fails when a walk confined to the ℓ1 ball of radius `radius` (plus the
    /// exit step) could leave the packable range.
    pub fn check_radius(&self, radius: u64) -> Result<()> {
        if radius as i64 + 1 > self.limit() {
            Err(Error::PackingOverflow { coord: radius as i64 + 1, bits: self.bits, dim: self.dim })
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> u64 {
        1u64 << (self.bits as usize * axis)
    }

    #[inline]
    fn offset(&self) -> i64 {
        1i64 << (self.bits - 1)
    }

    pub fn pack(&self, p: &Point) -> Result<u64> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: p.dim(), right: self.dim });
        }
        let lim = self.limit();
        if let Some(&c) = p.coords().iter().find(|c| (**c as i64).abs() > lim) {
            return Err(Error::PackingOverflow { coord: c as i64, bits: self.bits, dim: self.dim });
        }
        Ok(self.pack_unchecked(p.raw()))
    }

    #[inline]
    pub(crate) fn pack_unchecked(&self, c: &[i32; MAX_DIM]) -> u64 {
        let off = self.offset();
        let mut key = 0u64;
        for i in (0..self.dim).rev() {
            key = (key << self.bits) | (c[i] as i64 + off) as u64;
        }
        key
    }

    pub fn unpack(&self, key: u64) -> Point {
        let mask = if self.bits == 64 { u64::MAX } else { (1u64 << self.bits) - 1 };
        let off = self.offset();
        let mut c = [0i32; MAX_DIM];
        for (i, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = (((key >> (self.bits as usize * i)) & mask) as i64 - off) as i32;
        }
        Point::from_array(self.dim, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn widths() {
        assert_eq!(Packer::new(8).unwrap().limit(), 127);
        assert_eq!(Packer::new(5).unwrap().limit(), 2047);
        assert!(Packer::new(8).unwrap().check_radius(126).is_ok());
        assert!(Packer::new(8).unwrap().check_radius(127).is_err());
    }

    #[test]
    fn stride_is_a_unit_step() {
        let pk = Packer::new(5).unwrap();
        let p = Point::new(&[3, -7, 0, 11, -2]).unwrap();
        let q = Point::new(&[3, -7, 1, 11, -2]).unwrap();
        assert_eq!(pk.pack(&p).unwrap() + pk.stride(2), pk.pack(&q).unwrap());
        let r = Point::new(&[3, -8, 0, 11, -2]).unwrap();
        assert_eq!(pk.pack(&p).unwrap() - pk.stride(1), pk.pack(&r).unwrap());
    }

    #[test]
    fn overflow_reported() {
        let pk = Packer::new(8).unwrap();
        let p = Point::new(&[128, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(matches!(pk.pack(&p), Err(Error::PackingOverflow { .. })));
    }

    proptest! {
        #[test]
        fn pack_roundtrip(d in 3usize..=8, raw in proptest::collection::vec(-127i32..=127, 8)) {
            let pk = Packer::new(d).unwrap();
            let p = Point::new(&raw[..d]).unwrap();
            prop_assert_eq!(pk.unpack(pk.pack(&p).unwrap()), p);
        }
    }
}

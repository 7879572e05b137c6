//! Fixed-point encoding over the 64-bit arithmetic ring.
//!
//! All secure arithmetic in this crate happens in `Z_{2^64}` with two's
//! complement signed interpretation. Reals are carried as `round(r * 2^f)`
//! for a per-session fractional bit count `f`.

use crate::error::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// Element of the ring `Z_{2^64}`. Values `>= 2^63` denote negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct RingValue(pub u64);

impl RingValue {
    pub const ZERO: RingValue = RingValue(0);
    pub const ONE: RingValue = RingValue(1);

    #[inline]
    pub fn wrapping_add(self, rhs: RingValue) -> RingValue {
        RingValue(self.0.wrapping_add(rhs.0))
    }

    #[inline]
    pub fn wrapping_sub(self, rhs: RingValue) -> RingValue {
        RingValue(self.0.wrapping_sub(rhs.0))
    }

    #[inline]
    pub fn wrapping_mul(self, rhs: RingValue) -> RingValue {
        RingValue(self.0.wrapping_mul(rhs.0))
    }

    #[inline]
    pub fn wrapping_neg(self) -> RingValue {
        RingValue(self.0.wrapping_neg())
    }

    /// Two's complement signed view.
    #[inline]
    pub fn as_signed(self) -> i64 {
        self.0 as i64
    }

    #[inline]
    pub fn from_signed(v: i64) -> RingValue {
        RingValue(v as u64)
    }

    /// Arithmetic right shift in the signed interpretation.
    #[inline]
    pub fn arith_shr(self, bits: u32) -> RingValue {
        RingValue(((self.0 as i64) >> bits) as u64)
    }
}

impl Add for RingValue {
    type Output = RingValue;
    fn add(self, rhs: RingValue) -> RingValue {
        self.wrapping_add(rhs)
    }
}

impl Sub for RingValue {
    type Output = RingValue;
    fn sub(self, rhs: RingValue) -> RingValue {
        self.wrapping_sub(rhs)
    }
}

impl Mul for RingValue {
    type Output = RingValue;
    fn mul(self, rhs: RingValue) -> RingValue {
        self.wrapping_mul(rhs)
    }
}

impl Neg for RingValue {
    type Output = RingValue;
    fn neg(self) -> RingValue {
        self.wrapping_neg()
    }
}

/// Fractional-bit configuration shared by all parties of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointConfig {
    /// Fractional bits, in `[8, 32]`.
    pub fractional_bits: u32,
}

pub const TOTAL_BITS: u32 = 64;

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { fractional_bits: 16 }
    }
}

impl FixedPointConfig {
    pub fn new(fractional_bits: u32) -> Result<Self> {
        if !(8..=32).contains(&fractional_bits) {
            return Err(Error::Range(format!(
                "fractional_bits {fractional_bits} outside [8, 32]"
            )));
        }
        Ok(FixedPointConfig { fractional_bits })
    }

    /// Resolution of the representation, `2^-f`.
    pub fn ulp(&self) -> f64 {
        (2f64).powi(-(self.fractional_bits as i32))
    }

    /// Upper bound (exclusive) on representable magnitudes, `2^(63-f)`.
    pub fn max_magnitude(&self) -> f64 {
        (2f64).powi(63 - self.fractional_bits as i32)
    }
}

/// Encodes a real as `round(r * 2^f) mod 2^64`, ties to nearest even.
pub fn encode_fixed(r: f64, cfg: FixedPointConfig) -> Result<RingValue> {
    if !r.is_finite() || r.abs() >= cfg.max_magnitude() {
        return Err(Error::Range(format!(
            "{r} not representable with f={}",
            cfg.fractional_bits
        )));
    }
    let scaled = (r * (2f64).powi(cfg.fractional_bits as i32)).round_ties_even();
    Ok(RingValue::from_signed(scaled as i64))
}

/// Signed-interprets `v` and divides by `2^f`.
pub fn decode_fixed(v: RingValue, cfg: FixedPointConfig) -> f64 {
    v.as_signed() as f64 * cfg.ulp()
}

/// Encodes a slice of reals.
pub fn encode_slice(rs: &[f64], cfg: FixedPointConfig) -> Result<Vec<RingValue>> {
    rs.iter().map(|&r| encode_fixed(r, cfg)).collect()
}

/// Decodes a slice of ring values.
pub fn decode_slice(vs: &[RingValue], cfg: FixedPointConfig) -> Vec<f64> {
    vs.iter().map(|&v| decode_fixed(v, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn f16() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_fixed(1.5, f16()).unwrap(), RingValue(98304));
        assert_eq!(encode_fixed(0.0, f16()).unwrap(), RingValue(0));
        assert_eq!(
            encode_fixed(-0.25, f16()).unwrap(),
            RingValue(u64::MAX - 16384 + 1)
        );
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_fixed(RingValue(98304), f16()), 1.5);
        assert_eq!(decode_fixed(RingValue(0u64.wrapping_sub(16384)), f16()), -0.25);
        assert_eq!(decode_fixed(RingValue(1), f16()), 0.0000152587890625);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(encode_fixed(2f64.powi(47), f16()).is_err());
        assert!(encode_fixed(f64::NAN, f16()).is_err());
        assert!(encode_fixed(f64::INFINITY, f16()).is_err());
    }

    #[test]
    fn ties_to_even() {
        // 0.5 ulp cases: 2.5 and 3.5 in raw units round to 2 and 4.
        let cfg = FixedPointConfig { fractional_bits: 16 };
        let half_ulp = cfg.ulp() / 2.0;
        let two = encode_fixed(2.0 * cfg.ulp() + half_ulp, cfg).unwrap();
        let four = encode_fixed(3.0 * cfg.ulp() + half_ulp, cfg).unwrap();
        assert_eq!(two, RingValue(2));
        assert_eq!(four, RingValue(4));
    }

    #[test]
    fn round_trip_bulk() {
        let cfg = f16();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let r: f64 = rng.gen_range(-1000.0..1000.0);
            let back = decode_fixed(encode_fixed(r, cfg).unwrap(), cfg);
            assert!((back - r).abs() <= cfg.ulp() / 2.0 + 1e-12, "{r} -> {back}");
        }
    }

    proptest! {
        #[test]
        fn additive_homomorphism(a in -1.0e9f64..1.0e9, b in -1.0e9f64..1.0e9) {
            let cfg = f16();
            let sum = decode_fixed(
                encode_fixed(a, cfg).unwrap() + encode_fixed(b, cfg).unwrap(),
                cfg,
            );
            prop_assert!((sum - (a + b)).abs() <= cfg.ulp());
        }

        #[test]
        fn multiplication_scale_law(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let cfg = f16();
            let prod = encode_fixed(a, cfg).unwrap() * encode_fixed(b, cfg).unwrap();
            let recovered = decode_fixed(prod.arith_shr(cfg.fractional_bits), cfg);
            prop_assert!((recovered - a * b).abs() <= 2.0 * cfg.ulp() * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn wrapping_is_silent() {
        let a = RingValue(u64::MAX);
        assert_eq!(a + RingValue(1), RingValue(0));
        assert_eq!(RingValue(0) - RingValue(1), RingValue(u64::MAX));
    }
}

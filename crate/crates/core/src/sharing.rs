//! 2-out-of-3 replicated secret sharing over `Z_{2^64}`.
//!
//! A secret `x` is split into summands `s0 + s1 + s2 = x (mod 2^64)`.
//! Party `P_i` holds the pair `(s_i, s_{i+1})` (indices cyclic), so adjacent
//! parties overlap in exactly one summand and any two parties jointly cover
//! all three. Linear operations are communication-free.

use crate::error::{Error, Result};
use crate::ring::RingValue;
use rand::Rng;

/// One of the three computation parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartyId(pub u8);

impl PartyId {
    pub const ALL: [PartyId; 3] = [PartyId(0), PartyId(1), PartyId(2)];

    #[inline]
    pub fn next(self) -> PartyId {
        PartyId((self.0 + 1) % 3)
    }

    #[inline]
    pub fn prev(self) -> PartyId {
        PartyId((self.0 + 2) % 3)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for PartyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P{}", self.0 + 1)
    }
}

/// Party `P_i`'s pair of summands `(s_i, s_{i+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplicatedShare {
    /// Summand `s_i`.
    pub a: RingValue,
    /// Summand `s_{i+1}`.
    pub b: RingValue,
}

impl ReplicatedShare {
    pub fn new(a: RingValue, b: RingValue) -> Self {
        ReplicatedShare { a, b }
    }

    pub const ZERO: ReplicatedShare = ReplicatedShare {
        a: RingValue(0),
        b: RingValue(0),
    };

    /// Wire form: two 8-byte little-endian words, `(s_i, s_{i+1})` order.
    pub fn to_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.a.0.to_le_bytes());
        out[8..].copy_from_slice(&self.b.0.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; 16]) -> Self {
        let a = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let b = u64::from_le_bytes(bytes[8..].try_into().unwrap());
        ReplicatedShare::new(RingValue(a), RingValue(b))
    }
}

/// Splits `secret` into the three parties' share pairs.
///
/// Summands are `(r0, r1, secret - r0 - r1)`.
pub fn share(secret: RingValue, randomness: (RingValue, RingValue)) -> [ReplicatedShare; 3] {
    let (r0, r1) = randomness;
    let s2 = secret - r0 - r1;
    [
        ReplicatedShare::new(r0, r1),
        ReplicatedShare::new(r1, s2),
        ReplicatedShare::new(s2, r0),
    ]
}

/// Splits `secret` drawing randomness from `rng`.
pub fn share_random<R: Rng>(secret: RingValue, rng: &mut R) -> [ReplicatedShare; 3] {
    share(secret, (RingValue(rng.gen()), RingValue(rng.gen())))
}

/// Rebuilds the secret from any two parties' pairs, checking that the
/// overlapping summand agrees.
pub fn reconstruct(
    pa: (PartyId, ReplicatedShare),
    pb: (PartyId, ReplicatedShare),
) -> Result<RingValue> {
    let ((ia, sa), (ib, sb)) = (pa, pb);
    if ia == ib {
        return Err(Error::ShareCorruption(format!(
            "need two distinct parties, got {ia} twice"
        )));
    }
    // Order so that `lo.next() == hi`; then lo.b and hi.a are the same summand.
    let ((lo_id, lo), (hi_id, hi)) = if ia.next() == ib {
        ((ia, sa), (ib, sb))
    } else {
        ((ib, sb), (ia, sa))
    };
    debug_assert_eq!(lo_id.next(), hi_id);
    if lo.b != hi.a {
        return Err(Error::ShareCorruption(format!(
            "{lo_id}.s{} = {} but {hi_id}.s{} = {}",
            lo_id.next().0,
            lo.b.0,
            hi_id.0,
            hi.a.0
        )));
    }
    Ok(lo.a + lo.b + hi.b)
}

/// Rebuilds from all three parties, checking every overlap.
pub fn reconstruct_all(shares: [ReplicatedShare; 3]) -> Result<RingValue> {
    for i in 0..3u8 {
        let (pi, pn) = (PartyId(i), PartyId(i).next());
        if shares[pi.index()].b != shares[pn.index()].a {
            return Err(Error::ShareCorruption(format!(
                "summand s{} differs between {pi} and {pn}",
                pn.0
            )));
        }
    }
    Ok(shares[0].a + shares[1].a + shares[2].a)
}

/// One party's view of a secret-shared tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedTensor {
    pub shape: Vec<usize>,
    /// Current power-of-two fixed-point scale exponent (`f` or `2f`).
    pub scale: u32,
    pub data: Vec<ReplicatedShare>,
}

impl SharedTensor {
    pub fn new(shape: Vec<usize>, scale: u32, data: Vec<ReplicatedShare>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {n} elements, data has {}",
                data.len()
            )));
        }
        Ok(SharedTensor { shape, scale, data })
    }

    pub fn zeros(shape: Vec<usize>, scale: u32) -> Self {
        let n = shape.iter().product();
        SharedTensor {
            shape,
            scale,
            data: vec![ReplicatedShare::ZERO; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn check_same_shape(&self, other: &SharedTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn check_same_scale(&self, other: &SharedTensor) -> Result<()> {
        if self.scale != other.scale {
            return Err(Error::Scale {
                expected: self.scale,
                got: other.scale,
            });
        }
        Ok(())
    }

    /// Elementwise `self + other`, local per party.
    pub fn add_shared(&self, other: &SharedTensor) -> Result<SharedTensor> {
        self.check_same_shape(other)?;
        self.check_same_scale(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| ReplicatedShare::new(x.a + y.a, x.b + y.b))
            .collect();
        SharedTensor::new(self.shape.clone(), self.scale, data)
    }

    /// Elementwise `self - other`, local per party.
    pub fn sub_shared(&self, other: &SharedTensor) -> Result<SharedTensor> {
        self.check_same_shape(other)?;
        self.check_same_scale(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| ReplicatedShare::new(x.a - y.a, x.b - y.b))
            .collect();
        SharedTensor::new(self.shape.clone(), self.scale, data)
    }

    /// Adds a public constant vector. The constant is folded into summand
    /// `s0`, so only `P0` (holding it as `a`) and `P2` (as `b`) adjust.
    pub fn add_public(&self, me: PartyId, public: &[RingValue]) -> Result<SharedTensor> {
        if public.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "public operand length {} vs {}",
                public.len(),
                self.data.len()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(public)
            .map(|(x, &c)| match me.0 {
                0 => ReplicatedShare::new(x.a + c, x.b),
                2 => ReplicatedShare::new(x.a, x.b + c),
                _ => *x,
            })
            .collect();
        SharedTensor::new(self.shape.clone(), self.scale, data)
    }

    /// Elementwise multiplication by a public vector. The result carries the
    /// summed scale; the caller truncates when needed.
    pub fn mul_public(&self, public: &[RingValue], public_scale: u32) -> Result<SharedTensor> {
        if public.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "public operand length {} vs {}",
                public.len(),
                self.data.len()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(public)
            .map(|(x, &c)| ReplicatedShare::new(x.a * c, x.b * c))
            .collect();
        SharedTensor::new(self.shape.clone(), self.scale + public_scale, data)
    }

    /// Multiplication by a public scalar.
    pub fn mul_public_scalar(&self, c: RingValue, public_scale: u32) -> SharedTensor {
        let data = self
            .data
            .iter()
            .map(|x| ReplicatedShare::new(x.a * c, x.b * c))
            .collect();
        SharedTensor {
            shape: self.shape.clone(),
            scale: self.scale + public_scale,
            data,
        }
    }

    /// Negation, local.
    pub fn neg(&self) -> SharedTensor {
        let data = self
            .data
            .iter()
            .map(|x| ReplicatedShare::new(-x.a, -x.b))
            .collect();
        SharedTensor {
            shape: self.shape.clone(),
            scale: self.scale,
            data,
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<SharedTensor> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements into {shape:?}",
                self.data.len()
            )));
        }
        self.shape = shape;
        Ok(self)
    }
}

/// Dealer-side helper: shares a plaintext tensor into the three parties'
/// views. Lives outside the protocol path; used for inputs and tests.
pub fn share_tensor<R: Rng>(
    plain: &[RingValue],
    shape: Vec<usize>,
    scale: u32,
    rng: &mut R,
) -> [SharedTensor; 3] {
    let mut parts: [Vec<ReplicatedShare>; 3] = [
        Vec::with_capacity(plain.len()),
        Vec::with_capacity(plain.len()),
        Vec::with_capacity(plain.len()),
    ];
    for &x in plain {
        let sh = share_random(x, rng);
        for i in 0..3 {
            parts[i].push(sh[i]);
        }
    }
    parts.map(|data| SharedTensor {
        shape: shape.clone(),
        scale,
        data,
    })
}

/// Dealer-side helper: rebuilds a plaintext tensor from all three views,
/// checking overlap consistency on every element.
pub fn reconstruct_tensor(views: &[SharedTensor; 3]) -> Result<Vec<RingValue>> {
    let n = views[0].len();
    if views[1].len() != n || views[2].len() != n {
        return Err(Error::Shape("party views differ in length".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(reconstruct_all([
            views[0].data[i],
            views[1].data[i],
            views[2].data[i],
        ])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn share_example() {
        let sh = share(RingValue(42), (RingValue(10), RingValue(20)));
        assert_eq!(sh[0], ReplicatedShare::new(RingValue(10), RingValue(20)));
        assert_eq!(sh[1], ReplicatedShare::new(RingValue(20), RingValue(12)));
        assert_eq!(sh[2], ReplicatedShare::new(RingValue(12), RingValue(10)));
    }

    #[test]
    fn share_of_zero_wraps() {
        let sh = share(RingValue(0), (RingValue(5), RingValue(5)));
        assert_eq!(sh[1].b, RingValue(0u64.wrapping_sub(10)));
        assert_eq!(reconstruct_all(sh).unwrap(), RingValue(0));
    }

    #[test]
    fn degenerate_randomness() {
        let sh = share(RingValue(77), (RingValue(0), RingValue(0)));
        assert_eq!(sh[1].b, RingValue(77));
        assert_eq!(reconstruct_all(sh).unwrap(), RingValue(77));
    }

    #[test]
    fn reconstruct_from_each_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sh = share_random(RingValue(123456789), &mut rng);
        for (i, j) in [(0, 1), (1, 2), (2, 0), (1, 0), (2, 1), (0, 2)] {
            let v = reconstruct((PartyId(i), sh[i as usize]), (PartyId(j), sh[j as usize]))
                .unwrap();
            assert_eq!(v, RingValue(123456789));
        }
    }

    #[test]
    fn overlap_mismatch_detected() {
        let p0 = ReplicatedShare::new(RingValue(10), RingValue(20));
        let p1 = ReplicatedShare::new(RingValue(21), RingValue(12));
        let err = reconstruct((PartyId(0), p0), (PartyId(1), p1)).unwrap_err();
        assert!(matches!(err, Error::ShareCorruption(_)));
    }

    #[test]
    fn round_trip_bulk() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100_000 {
            let x = RingValue(rng.gen());
            let sh = share_random(x, &mut rng);
            assert_eq!(reconstruct_all(sh).unwrap(), x);
        }
    }

    #[test]
    fn summand_uniformity_smoke() {
        // Over fresh sharings of a fixed secret, each summand should look
        // uniform: mean near the ring midpoint, each bit near frequency 0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        const N: usize = 100_000;
        let secret = RingValue(42);
        let mut sums = [0f64; 3];
        let mut bit_counts = [[0u64; 64]; 3];
        for _ in 0..N {
            let sh = share_random(secret, &mut rng);
            let summands = [sh[0].a, sh[1].a, sh[2].a];
            for (k, s) in summands.iter().enumerate() {
                sums[k] += s.0 as f64;
                for bit in 0..64 {
                    bit_counts[k][bit] += (s.0 >> bit) & 1;
                }
            }
        }
        let midpoint = 2f64.powi(63);
        // std of the mean of N uniform u64 samples
        let se = 2f64.powi(64) / (12f64).sqrt() / (N as f64).sqrt();
        for k in 0..3 {
            let mean = sums[k] / N as f64;
            assert!(
                (mean - midpoint).abs() < 3.0 * se,
                "summand {k} mean {mean} vs midpoint {midpoint}"
            );
            for bit in 0..64 {
                let freq = bit_counts[k][bit] as f64 / N as f64;
                assert!(
                    (freq - 0.5).abs() <= 0.01,
                    "summand {k} bit {bit} frequency {freq}"
                );
            }
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (x, y, c) = (
                RingValue(rng.gen()),
                RingValue(rng.gen()),
                RingValue(rng.gen()),
            );
            let xs = share_tensor(&[x], vec![1], 0, &mut rng);
            let ys = share_tensor(&[y], vec![1], 0, &mut rng);
            let sum: Vec<_> = (0..3)
                .map(|i| xs[i].add_shared(&ys[i]).unwrap())
                .collect();
            let sum = reconstruct_tensor(&[sum[0].clone(), sum[1].clone(), sum[2].clone()])
                .unwrap();
            assert_eq!(sum[0], x + y);

            let scaled: Vec<_> = (0..3).map(|i| xs[i].mul_public_scalar(c, 0)).collect();
            let scaled =
                reconstruct_tensor(&[scaled[0].clone(), scaled[1].clone(), scaled[2].clone()])
                    .unwrap();
            assert_eq!(scaled[0], x * c);
        }
    }

    #[test]
    fn add_public_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs = share_tensor(&[RingValue(3)], vec![1], 0, &mut rng);
        let out: [SharedTensor; 3] = std::array::from_fn(|i| {
            xs[i].add_public(PartyId(i as u8), &[RingValue(0)]).unwrap()
        });
        assert_eq!(reconstruct_tensor(&out).unwrap()[0], RingValue(3));
        let out: [SharedTensor; 3] = std::array::from_fn(|i| {
            xs[i].add_public(PartyId(i as u8), &[RingValue(39)]).unwrap()
        });
        assert_eq!(reconstruct_tensor(&out).unwrap()[0], RingValue(42));
    }

    #[test]
    fn share_bytes_round_trip() {
        let s = ReplicatedShare::new(RingValue(0x0102030405060708), RingValue(0x1122334455667788));
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..8], &0x0102030405060708u64.to_le_bytes());
        assert_eq!(ReplicatedShare::from_bytes(&bytes), s);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = share_tensor(&[RingValue(1), RingValue(2)], vec![2], 16, &mut rng);
        let b = share_tensor(&[RingValue(1)], vec![1], 16, &mut rng);
        assert!(matches!(a[0].add_shared(&b[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn scale_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = share_tensor(&[RingValue(1)], vec![1], 16, &mut rng);
        let b = share_tensor(&[RingValue(1)], vec![1], 32, &mut rng);
        assert!(matches!(a[0].add_shared(&b[0]), Err(Error::Scale { .. })));
    }
}

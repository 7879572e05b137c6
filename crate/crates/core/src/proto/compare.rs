//! Secure comparison and data-dependent selection.
//!
//! Comparison works on the difference `d = x - y`: each of its three
//! summands is reinterpreted locally as a 64-bit string under XOR-replicated
//! sharing, and a binary adder recovers the sign bit of their sum. A
//! carry-save step folds the three addends into two for free, then a
//! Kogge-Stone prefix network resolves the carries in log2(64) rounds; the
//! result is converted back to an arithmetic 0/1 share. Everything is
//! batched over tensor elements, so the round count is fixed (10)
//! regardless of batch size.

use crate::error::{Error, Result};
use crate::net::{Opcode, PartyCtx};
use crate::proto::mul::mul;
use crate::ring::RingValue;
use crate::sharing::{PartyId, ReplicatedShare, SharedTensor};

/// XOR-replicated sharing of a vector of 64-bit words: the secret word is
/// `a0 ^ a1 ^ a2` and party `P_i` holds `(a_i, a_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryShare {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

impl BinaryShare {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Bitwise XOR, local.
    pub fn xor(&self, other: &BinaryShare) -> BinaryShare {
        BinaryShare {
            a: self.a.iter().zip(&other.a).map(|(x, y)| x ^ y).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| x ^ y).collect(),
        }
    }

    /// Left shift of every word, local.
    pub fn shl(&self, k: u32) -> BinaryShare {
        BinaryShare {
            a: self.a.iter().map(|x| x << k).collect(),
            b: self.b.iter().map(|x| x << k).collect(),
        }
    }

    /// Extracts bit `i` of every word into the low bit.
    pub fn lane(&self, i: u32) -> BinaryShare {
        BinaryShare {
            a: self.a.iter().map(|x| (x >> i) & 1).collect(),
            b: self.b.iter().map(|x| (x >> i) & 1).collect(),
        }
    }

    /// Bitwise AND of several operand pairs in a single communication round.
    /// Same dance as arithmetic multiplication, with XOR for addition.
    pub fn and_many(ctx: &mut PartyCtx, pairs: &[(&BinaryShare, &BinaryShare)]) -> Result<Vec<BinaryShare>> {
        let total: usize = pairs.iter().map(|(x, _)| x.len()).sum();
        let alpha = ctx.zero_share_xor(total);
        let mut mine = Vec::with_capacity(total);
        for (x, y) in pairs {
            if x.len() != y.len() {
                return Err(Error::Shape("AND operands differ in length".into()));
            }
            for k in 0..x.len() {
                mine.push((x.a[k] & y.a[k]) ^ (x.a[k] & y.b[k]) ^ (x.b[k] & y.a[k]));
            }
        }
        for (m, z) in mine.iter_mut().zip(&alpha) {
            *m ^= z;
        }
        let words: Vec<RingValue> = mine.iter().map(|&w| RingValue(w)).collect();
        let received = ctx.exchange(Opcode::BitAnd, &[(ctx.id.prev(), &words)], &[ctx.id.next()])?;
        let theirs = &received[0];
        if theirs.len() != total {
            return Err(Error::Frame(format!(
                "expected {total} words, got {}",
                theirs.len()
            )));
        }
        let mut out = Vec::with_capacity(pairs.len());
        let mut off = 0;
        for (x, _) in pairs {
            let n = x.len();
            out.push(BinaryShare {
                a: mine[off..off + n].to_vec(),
                b: theirs[off..off + n].iter().map(|w| w.0).collect(),
            });
            off += n;
        }
        Ok(out)
    }
}

/// Arithmetic sharing of XOR-summand `j` of `bits` (each word holding a
/// single 0/1 value). Summand `j` is known to `P_j` and `P_{j-1}`, so its
/// value lands in arithmetic summand slot `j` and the rest stay zero.
fn summand_as_arith(me: PartyId, bits: &BinaryShare, j: u8, shape: &[usize]) -> Result<SharedTensor> {
    let data = (0..bits.len())
        .map(|k| {
            let a = if me.0 == j { bits.a[k] } else { 0 };
            let b = if me.next().0 == j { bits.b[k] } else { 0 };
            ReplicatedShare::new(RingValue(a), RingValue(b))
        })
        .collect();
    SharedTensor::new(shape.to_vec(), 0, data)
}

/// XOR of two arithmetically shared bits: `u + v - 2uv`. One round.
fn xor_arith(ctx: &mut PartyCtx, u: &SharedTensor, v: &SharedTensor) -> Result<SharedTensor> {
    let prod = mul(ctx, u, v)?;
    u.add_shared(v)?
        .sub_shared(&prod.mul_public_scalar(RingValue(2), 0))
}

/// Elementwise signed comparison: returns an arithmetic 0/1 share that is 1
/// where `x < y`. Inputs must carry the same scale; magnitudes must stay
/// below `2^62` so the difference cannot overflow. 10 rounds at any batch
/// size.
pub fn less_than(ctx: &mut PartyCtx, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    let d = x.sub_shared(y)?;
    let me = ctx.id;
    let n = d.len();
    let summand_bits = |j: u8| -> BinaryShare {
        BinaryShare {
            a: if me.0 == j {
                d.data.iter().map(|s| s.a.0).collect()
            } else {
                vec![0; n]
            },
            b: if me.next().0 == j {
                d.data.iter().map(|s| s.b.0).collect()
            } else {
                vec![0; n]
            },
        }
    };
    let (s0, s1, s2) = (summand_bits(0), summand_bits(1), summand_bits(2));
    // carry-save: three addends become sum word S and carry word C for free
    // modulo two AND gates for the majority
    let s = s0.xor(&s1).xor(&s2);
    let s01 = s0.xor(&s1);
    let ands = BinaryShare::and_many(ctx, &[(&s0, &s1), (&s01, &s2)])?;
    let c = ands[0].xor(&ands[1]).shl(1);
    // Kogge-Stone prefix over the generate/propagate words of S + C.
    // Per bit, g and p are disjoint, so the (g, p) combine uses XOR for the
    // OR and the invariant is preserved down the network.
    let mut g = BinaryShare::and_many(ctx, &[(&s, &c)])?.pop().unwrap();
    let p_bits = s.xor(&c);
    let mut p = p_bits.clone();
    let mut span = 1u32;
    while span < 64 {
        let g_up = g.shl(span);
        let p_up = p.shl(span);
        let ands = BinaryShare::and_many(ctx, &[(&p, &g_up), (&p, &p_up)])?;
        g = g.xor(&ands[0]);
        p = ands[1].clone();
        span *= 2;
    }
    // sign bit = p_63 ^ carry into bit 63, i.e. carry out of bit 62
    let msb = p_bits.lane(63).xor(&g.lane(62)).lane(0);
    // back to an arithmetic bit: XOR the three summand bits with two
    // multiplications
    let b0 = summand_as_arith(me, &msb, 0, &x.shape)?;
    let b1 = summand_as_arith(me, &msb, 1, &x.shape)?;
    let b2 = summand_as_arith(me, &msb, 2, &x.shape)?;
    let u = xor_arith(ctx, &b0, &b1)?;
    xor_arith(ctx, &u, &b2)
}

/// Oblivious choice: returns `x` where `bit` is 1 and `y` where it is 0,
/// computed as `y + bit * (x - y)`. `bit` must be a 0/1 share at scale 0, so
/// no truncation is needed. One round.
pub fn select(ctx: &mut PartyCtx, bit: &SharedTensor, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    if bit.scale != 0 {
        return Err(Error::Scale {
            expected: 0,
            got: bit.scale,
        });
    }
    let diff = x.sub_shared(y)?;
    let prod = mul(ctx, bit, &diff)?;
    y.add_shared(&prod)
}

/// Splits the flattened `[m, n]` tensor into its `n` columns of length `m`.
fn columns(x: &SharedTensor, m: usize, n: usize) -> Vec<SharedTensor> {
    (0..n)
        .map(|j| {
            let data = (0..m).map(|i| x.data[i * n + j]).collect();
            SharedTensor {
                shape: vec![m],
                scale: x.scale,
                data,
            }
        })
        .collect()
}

fn concat(parts: &[SharedTensor]) -> SharedTensor {
    let data: Vec<ReplicatedShare> = parts.iter().flat_map(|t| t.data.iter().copied()).collect();
    SharedTensor {
        shape: vec![data.len()],
        scale: parts[0].scale,
        data,
    }
}

fn split(x: &SharedTensor, parts: usize) -> Vec<SharedTensor> {
    let m = x.len() / parts;
    (0..parts)
        .map(|k| SharedTensor {
            shape: vec![m],
            scale: x.scale,
            data: x.data[k * m..(k + 1) * m].to_vec(),
        })
        .collect()
}

/// Repeats each bit share `reps` times, to gate a block of values with one
/// decision.
fn expand_bits(bit: &SharedTensor, reps: usize) -> SharedTensor {
    let data: Vec<ReplicatedShare> = bit
        .data
        .iter()
        .flat_map(|s| std::iter::repeat(*s).take(reps))
        .collect();
    SharedTensor {
        shape: vec![data.len()],
        scale: 0,
        data,
    }
}

fn leading_shape(x: &SharedTensor) -> (Vec<usize>, usize, usize) {
    let n = *x.shape.last().expect("rank >= 1");
    let m = x.len() / n;
    let lead = x.shape[..x.shape.len() - 1].to_vec();
    (lead, m, n)
}

/// One knockout stage over a list of same-shape candidate tensors. All pair
/// comparisons run as one batched `less_than`; `payloads` are extra tensors
/// (indices, one-hot rows) selected with the same decision bits, each entry
/// carrying `reps` values per compared element.
fn tournament_stage(
    ctx: &mut PartyCtx,
    cands: Vec<Vec<SharedTensor>>,
    reps: &[usize],
) -> Result<Vec<Vec<SharedTensor>>> {
    let n = cands[0].len();
    let pairs = n / 2;
    if pairs == 0 {
        return Ok(cands);
    }
    let left = concat(&cands[0][..2 * pairs].iter().step_by(2).cloned().collect::<Vec<_>>());
    let right = concat(&cands[0][1..2 * pairs].iter().step_by(2).cloned().collect::<Vec<_>>());
    let bit = less_than(ctx, &left, &right)?;
    let mut out: Vec<Vec<SharedTensor>> = vec![Vec::new(); cands.len()];
    for (t, track) in cands.iter().enumerate() {
        let l = concat(&track[..2 * pairs].iter().step_by(2).cloned().collect::<Vec<_>>());
        let r = concat(&track[1..2 * pairs].iter().step_by(2).cloned().collect::<Vec<_>>());
        let gate = if reps[t] == 1 {
            bit.clone()
        } else {
            expand_bits(&bit, reps[t])
        };
        // bit == 1 means left < right, so the right candidate wins
        let won = select(ctx, &gate, &r, &l)?;
        out[t] = split(&won, pairs);
        if n % 2 == 1 {
            out[t].push(track[n - 1].clone());
        }
    }
    Ok(out)
}

/// Maximum along the last axis. `ceil(log2 n)` comparison stages.
pub fn max_last_axis(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let (lead, m, n) = leading_shape(x);
    let mut cands = vec![columns(x, m, n)];
    while cands[0].len() > 1 {
        cands = tournament_stage(ctx, cands, &[1])?;
    }
    let mut out = cands.pop().unwrap().pop().unwrap();
    out.shape = if lead.is_empty() { vec![1] } else { lead };
    Ok(out)
}

/// Maximum and its position along the last axis. Returns `(values,
/// indices)`; indices are 0/..(n-1) shares at scale 0.
pub fn argmax_last_axis(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<(SharedTensor, SharedTensor)> {
    let (lead, m, n) = leading_shape(x);
    let idx_cols: Vec<SharedTensor> = (0..n)
        .map(|j| {
            SharedTensor::zeros(vec![m], 0)
                .add_public(ctx.id, &vec![RingValue(j as u64); m])
                .unwrap()
        })
        .collect();
    let mut cands = vec![columns(x, m, n), idx_cols];
    while cands[0].len() > 1 {
        cands = tournament_stage(ctx, cands, &[1, 1])?;
    }
    let out_shape = if lead.is_empty() { vec![1] } else { lead };
    let mut vals = cands[0].pop().unwrap();
    let mut idxs = cands[1].pop().unwrap();
    vals.shape = out_shape.clone();
    idxs.shape = out_shape;
    Ok((vals, idxs))
}

/// Maximum position along the last axis as a shared one-hot row, same shape
/// as the input, scale 0. The winner's identity never leaves the sharing.
pub fn argmax_onehot(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let (_, m, n) = leading_shape(x);
    let onehot_cols: Vec<SharedTensor> = (0..n)
        .map(|j| {
            let mut row = vec![RingValue(0); m * n];
            for i in 0..m {
                row[i * n + j] = RingValue(1);
            }
            SharedTensor::zeros(vec![m * n], 0).add_public(ctx.id, &row).unwrap()
        })
        .collect();
    let mut cands = vec![columns(x, m, n), onehot_cols];
    while cands[0].len() > 1 {
        cands = tournament_stage(ctx, cands, &[1, n])?;
    }
    let mut hot = cands[1].pop().unwrap();
    hot.shape = x.shape.clone();
    Ok(hot)
}

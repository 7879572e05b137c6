//! Probabilistic fixed-point truncation (divide by `2^shift`).
//!
//! The three summands are first collapsed into two: `u = s0 + s1`, which
//! `P0` holds in full, and `v = s2`, which `P1` and `P2` both hold. Each
//! side truncates its part locally -- `u' = u >> shift`, `v' = -((-v) >>
//! shift)` -- so that `u' + v'` equals the truncated secret up to one unit
//! in the last place. `P0` then re-randomizes `u'` against a PRG value `r`
//! it shares with `P2` and forwards the masked difference `m = u' - r` to
//! `P1`, restoring the replicated layout `(r, m, v')` with a single frame.
//!
//! The result can be off by one ulp, and wraps entirely with probability
//! about `|x| / 2^64` -- negligible for fixed-point payloads that live far
//! below the ring modulus.

use crate::error::{Error, Result};
use crate::net::{Opcode, PartyCtx};
use crate::ring::RingValue;
use crate::sharing::{ReplicatedShare, SharedTensor};

/// Rescales every element of `x` down by `2^shift`, reducing its scale
/// accordingly. One round, one frame (`P0 -> P1`).
pub fn trunc(ctx: &mut PartyCtx, x: &SharedTensor, shift: u32) -> Result<SharedTensor> {
    if shift == 0 || shift >= 64 {
        return Err(Error::Validation(format!(
            "truncation shift {shift} outside [1, 63]"
        )));
    }
    if x.scale < shift {
        return Err(Error::Scale {
            expected: shift,
            got: x.scale,
        });
    }
    let n = x.len();
    let scale = x.scale - shift;
    let logical = |v: RingValue| RingValue(v.0 >> shift);
    let trunc_low = |v: RingValue| -logical(-v);
    let data: Vec<ReplicatedShare> = match ctx.id.0 {
        0 => {
            let r = ctx.draw_with_prev(n);
            let m: Vec<RingValue> = x
                .data
                .iter()
                .zip(&r)
                .map(|(s, &ri)| logical(s.a + s.b) - ri)
                .collect();
            ctx.exchange(Opcode::Trunc, &[(ctx.id.next(), &m)], &[])?;
            r.iter()
                .zip(&m)
                .map(|(&ri, &mi)| ReplicatedShare::new(ri, mi))
                .collect()
        }
        1 => {
            let received = ctx.exchange(Opcode::Trunc, &[], &[ctx.id.prev()])?;
            let m = &received[0];
            if m.len() != n {
                return Err(Error::Frame(format!(
                    "expected {n} ring values, got {}",
                    m.len()
                )));
            }
            x.data
                .iter()
                .zip(m)
                .map(|(s, &mi)| ReplicatedShare::new(mi, trunc_low(s.b)))
                .collect()
        }
        _ => {
            let r = ctx.draw_with_next(n);
            ctx.exchange(Opcode::Trunc, &[], &[])?;
            x.data
                .iter()
                .zip(&r)
                .map(|(s, &ri)| ReplicatedShare::new(trunc_low(s.a), ri))
                .collect()
        }
    };
    SharedTensor::new(x.shape.clone(), scale, data)
}

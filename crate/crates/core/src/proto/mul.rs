//! One-round secure multiplication native to replicated sharing, plus the
//! output reveal.
//!
//! For `x = Σ x_i`, `y = Σ y_i`, party `P_i` can form
//! `t_i = x_i*y_i + x_i*y_{i+1} + x_{i+1}*y_i` locally; the `t_i` sum to
//! `x*y`. Each party re-randomizes `t_i` with a zero-sharing summand and
//! sends it to its previous neighbor, restoring the replicated pair layout
//! in a single round of one ring value per element.

use crate::error::{Error, Result};
use crate::net::{Opcode, PartyCtx};
use crate::par::par_map;
use crate::ring::RingValue;
use crate::sharing::{ReplicatedShare, SharedTensor};

/// Elementwise secure product. Output carries the summed scale; the caller
/// truncates when both inputs were fixed-point.
pub fn mul(ctx: &mut PartyCtx, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    if x.shape != y.shape {
        return Err(Error::Shape(format!("{:?} vs {:?}", x.shape, y.shape)));
    }
    let n = x.len();
    let noise = ctx.zero_share(n);
    let pairs: Vec<(ReplicatedShare, ReplicatedShare)> = x
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (*a, *b))
        .collect();
    let mut mine: Vec<RingValue> = par_map(&pairs, |(xs, ys)| {
        xs.a * ys.a + xs.a * ys.b + xs.b * ys.a
    });
    for (m, z) in mine.iter_mut().zip(&noise) {
        *m = *m + *z;
    }
    ctx.count_elem_muls(n as u64);
    let received = ctx.exchange(Opcode::Mul, &[(ctx.id.prev(), &mine)], &[ctx.id.next()])?;
    let theirs = &received[0];
    if theirs.len() != n {
        return Err(Error::Frame(format!(
            "expected {n} ring values, got {}",
            theirs.len()
        )));
    }
    let data = mine
        .iter()
        .zip(theirs)
        .map(|(&a, &b)| ReplicatedShare::new(a, b))
        .collect();
    SharedTensor::new(x.shape.clone(), x.scale + y.scale, data)
}

/// Secure matrix product of `(m, k) x (k, p)`, still one round: the local
/// cross terms are whole matrix products, and only the `m*p` outputs are
/// reshared.
pub fn matmul(ctx: &mut PartyCtx, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    let (&[m, k], &[k2, p]) = (&x.shape[..], &y.shape[..]) else {
        return Err(Error::Shape(format!(
            "matmul wants rank-2 tensors, got {:?} x {:?}",
            x.shape, y.shape
        )));
    };
    if k != k2 {
        return Err(Error::Shape(format!(
            "inner dimensions differ: {:?} x {:?}",
            x.shape, y.shape
        )));
    }
    let noise = ctx.zero_share(m * p);
    let rows: Vec<usize> = (0..m).collect();
    let mut mine: Vec<RingValue> = par_map(&rows, |&i| {
        let mut row = vec![RingValue::ZERO; p];
        for l in 0..k {
            let xs = x.data[i * k + l];
            for (j, out) in row.iter_mut().enumerate() {
                let ys = y.data[l * p + j];
                *out = *out + xs.a * ys.a + xs.a * ys.b + xs.b * ys.a;
            }
        }
        row
    })
    .into_iter()
    .flatten()
    .collect();
    for (v, z) in mine.iter_mut().zip(&noise) {
        *v = *v + *z;
    }
    ctx.count_elem_muls((m * p) as u64);
    let received = ctx.exchange(Opcode::Mul, &[(ctx.id.prev(), &mine)], &[ctx.id.next()])?;
    let data = mine
        .iter()
        .zip(&received[0])
        .map(|(&a, &b)| ReplicatedShare::new(a, b))
        .collect();
    SharedTensor::new(vec![m, p], x.scale + y.scale, data)
}

/// Replaces a sharing's summands with fresh uniform ones for the same
/// secret, in one round. Required before truncating shares that were built
/// locally from public data: their summands are not uniform, and the
/// truncation protocol's two-summand split wraps on such inputs.
pub fn reshare(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let n = x.len();
    let noise = ctx.zero_share(n);
    let mine: Vec<RingValue> = x
        .data
        .iter()
        .zip(&noise)
        .map(|(s, &z)| s.a + z)
        .collect();
    let received = ctx.exchange(Opcode::Reshare, &[(ctx.id.prev(), &mine)], &[ctx.id.next()])?;
    if received[0].len() != n {
        return Err(Error::Frame(format!(
            "expected {n} ring values, got {}",
            received[0].len()
        )));
    }
    let data = mine
        .iter()
        .zip(&received[0])
        .map(|(&a, &b)| ReplicatedShare::new(a, b))
        .collect();
    SharedTensor::new(x.shape.clone(), x.scale, data)
}

/// Opens a shared tensor to all three parties: each sends its second
/// summand to its previous neighbor, completing everyone's view.
pub fn reveal(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<Vec<RingValue>> {
    let mine: Vec<RingValue> = x.data.iter().map(|s| s.b).collect();
    let received = ctx.exchange(Opcode::Reveal, &[(ctx.id.prev(), &mine)], &[ctx.id.next()])?;
    ctx.reveal_count += 1;
    Ok(x.data
        .iter()
        .zip(&received[0])
        .map(|(s, &missing)| s.a + s.b + missing)
        .collect())
}

//! Secure transformer kernels: linear projection, layer norm, piecewise
//! GELU, stabilized SoftMax and multi-head attention, plus the full forward
//! pass over a shared input.

use crate::error::{Error, Result};
use crate::net::{PartyCtx, Phase};
use crate::nn::model::{EncodedModel, GeluMode, PublicTensor, WeightRepr};
use crate::par::par_map;
use crate::proto::{
    exp_approx, less_than, matmul, max_last_axis, mul, recip_approx, rsqrt_approx, select, trunc,
};
use crate::ring::{encode_fixed, FixedPointConfig, RingValue};
use crate::sharing::{ReplicatedShare, SharedTensor};

pub const LAYERNORM_EPS: f64 = 1e-5;
/// Additive logit penalty for masked positions, applied before the
/// temperature division: large enough that exp underflows to zero at f=16,
/// small enough to stay inside the exponential's input range after the max
/// subtraction.
pub const MASK_PENALTY: f64 = -64.0;

/// Local transpose of a rank-2 shared tensor.
pub fn transpose(x: &SharedTensor) -> Result<SharedTensor> {
    let &[m, n] = &x.shape[..] else {
        return Err(Error::Shape(format!("transpose wants rank 2, got {:?}", x.shape)));
    };
    let mut data = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            data.push(x.data[i * n + j]);
        }
    }
    SharedTensor::new(vec![n, m], x.scale, data)
}

/// Repeats each element of a `[m]` tensor `n` times, giving `[m, n]`.
pub(crate) fn expand_last(x: &SharedTensor, n: usize) -> SharedTensor {
    let data: Vec<ReplicatedShare> = x
        .data
        .iter()
        .flat_map(|s| std::iter::repeat(*s).take(n))
        .collect();
    SharedTensor {
        shape: vec![x.len(), n],
        scale: x.scale,
        data,
    }
}

/// Sums along the last axis of a rank-2 tensor, locally.
pub(crate) fn row_sum(x: &SharedTensor) -> Result<SharedTensor> {
    let &[m, n] = &x.shape[..] else {
        return Err(Error::Shape(format!("row_sum wants rank 2, got {:?}", x.shape)));
    };
    let data = (0..m)
        .map(|i| {
            x.data[i * n..(i + 1) * n]
                .iter()
                .fold(ReplicatedShare::ZERO, |acc, s| {
                    ReplicatedShare::new(acc.a + s.a, acc.b + s.b)
                })
        })
        .collect();
    SharedTensor::new(vec![m], x.scale, data)
}

/// Multiplies by a public real constant, truncating back to the input
/// scale. One round.
pub(crate) fn scale_const(ctx: &mut PartyCtx, x: &SharedTensor, c: f64) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(x.scale)?;
    let scaled = x.mul_public_scalar(encode_fixed(c, fx)?, fx.fractional_bits);
    trunc(ctx, &scaled, fx.fractional_bits)
}

/// Repeats a rank-1 tensor as `m` identical rows.
fn tile_rows(t: &SharedTensor, m: usize) -> SharedTensor {
    let n = t.len();
    let data: Vec<ReplicatedShare> = (0..m).flat_map(|_| t.data.iter().copied()).collect();
    SharedTensor {
        shape: vec![m, n],
        scale: t.scale,
        data,
    }
}

pub(crate) fn concat_rows(parts: &[SharedTensor]) -> SharedTensor {
    let data: Vec<ReplicatedShare> = parts.iter().flat_map(|t| t.data.iter().copied()).collect();
    SharedTensor {
        shape: vec![data.len() / parts[0].shape[1], parts[0].shape[1]],
        scale: parts[0].scale,
        data,
    }
}

/// `x * W` with `x` shared and `W` public: pure local work on each summand,
/// leaving the result at the summed scale (no truncation here).
pub(crate) fn matmul_public(x: &SharedTensor, w: &PublicTensor) -> Result<SharedTensor> {
    let (&[m, n], &[n2, p]) = (&x.shape[..], &w.shape[..]) else {
        return Err(Error::Shape(format!(
            "matmul wants rank-2, got {:?} x {:?}",
            x.shape, w.shape
        )));
    };
    if n != n2 {
        return Err(Error::Shape(format!(
            "inner dimensions differ: {:?} x {:?}",
            x.shape, w.shape
        )));
    }
    let rows: Vec<usize> = (0..m).collect();
    let data: Vec<ReplicatedShare> = par_map(&rows, |&i| {
        let mut row = vec![ReplicatedShare::ZERO; p];
        for l in 0..n {
            let xs = x.data[i * n + l];
            for (j, out) in row.iter_mut().enumerate() {
                let c = w.data[l * p + j];
                *out = ReplicatedShare::new(out.a + xs.a * c, out.b + xs.b * c);
            }
        }
        row
    })
    .into_iter()
    .flatten()
    .collect();
    SharedTensor::new(vec![m, p], x.scale + w.scale, data)
}

/// `x W + b`: accumulates at double scale and truncates once per output
/// element. With public `W` the matrix product costs zero interactive
/// rounds (one truncation round follows); shared `W` uses the
/// multiplication protocol.
pub fn mpc_linear(
    ctx: &mut PartyCtx,
    x: &SharedTensor,
    w: &WeightRepr,
    bias: Option<&WeightRepr>,
) -> Result<SharedTensor> {
    let mut acc = match w {
        WeightRepr::Public(t) => matmul_public(x, t)?,
        WeightRepr::Shared(t) => matmul(ctx, x, t)?,
    };
    if let Some(b) = bias {
        let &[m, p] = &acc.shape[..] else { unreachable!() };
        let shift = acc.scale - match b {
            WeightRepr::Public(t) => t.scale,
            WeightRepr::Shared(t) => t.scale,
        };
        match b {
            WeightRepr::Public(t) => {
                if t.data.len() != p {
                    return Err(Error::Shape(format!(
                        "bias length {} vs {p} outputs",
                        t.data.len()
                    )));
                }
                // lift the bias to the accumulator scale
                let lifted: Vec<RingValue> = (0..m * p)
                    .map(|k| RingValue(t.data[k % p].0 << shift))
                    .collect();
                acc = acc.add_public(ctx.id, &lifted)?;
            }
            WeightRepr::Shared(t) => {
                let mut lifted = t.mul_public_scalar(RingValue(1u64 << shift), 0);
                lifted.scale = acc.scale;
                acc = acc.add_shared(&tile_rows(&lifted, m))?;
            }
        }
    }
    trunc(ctx, &acc, x.scale)
}

/// Piecewise linear GELU over shares, branch-literal:
/// `0` below -3, `0.5x` on [-3,-1), `0.8413x + 0.1587` on [-1,1) and
/// `x - 0.1587` above. One batched comparison for all three thresholds,
/// then three oblivious selections.
pub fn mpc_gelu(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(x.scale)?;
    let n = x.len();
    let flat = SharedTensor {
        shape: vec![n],
        scale: x.scale,
        data: x.data.clone(),
    };
    // all thresholds in one comparison round trip
    let stacked = SharedTensor {
        shape: vec![3 * n],
        scale: x.scale,
        data: [&flat.data[..], &flat.data, &flat.data].concat(),
    };
    let mut limits = Vec::with_capacity(3 * n);
    for t in [-3.0, -1.0, 1.0] {
        limits.extend(std::iter::repeat(encode_fixed(t, fx)?).take(n));
    }
    let limit_tensor = SharedTensor::zeros(vec![3 * n], x.scale).add_public(ctx.id, &limits)?;
    let bits = less_than(ctx, &stacked, &limit_tensor)?;
    let bit = |k: usize| SharedTensor {
        shape: vec![n],
        scale: 0,
        data: bits.data[k * n..(k + 1) * n].to_vec(),
    };
    let (below3, below1, below_plus1) = (bit(0), bit(1), bit(2));
    let half_x = scale_const(ctx, &flat, 0.5)?;
    let mid = scale_const(ctx, &flat, 0.8413)?
        .add_public(ctx.id, &vec![encode_fixed(0.1587, fx)?; n])?;
    let high = flat.add_public(ctx.id, &vec![encode_fixed(-0.1587, fx)?; n])?;
    let zero = SharedTensor::zeros(vec![n], x.scale);
    let t = select(ctx, &below_plus1, &mid, &high)?;
    let t = select(ctx, &below1, &half_x, &t)?;
    let mut out = select(ctx, &below3, &zero, &t)?;
    out.shape = x.shape.clone();
    Ok(out)
}

///// Stabilized SoftMax along the last axis: masked positions get a `-64`
/// penalty, logits are divided by the public temperature, the shared row
/// maximum is subtracted, and the exponentials are normalized with a
/// Newton reciprocal of their sum.
pub fn mpc_softmax(
    ctx: &mut PartyCtx,
    logits: &SharedTensor,
    temperature: f64,
    mask: Option<&[bool]>,
) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(logits.scale)?;
    let n = *logits.shape.last().ok_or_else(|| Error::Shape("rank >= 1".into()))?;
    let m = logits.len() / n;
    let mut x = SharedTensor {
        shape: vec![m, n],
        scale: logits.scale,
        data: logits.data.clone(),
    };
    if let Some(mask) = mask {
        if mask.len() != x.len() {
            return Err(Error::Shape(format!(
                "mask length {} vs {} logits",
                mask.len(),
                x.len()
            )));
        }
        let penalty = encode_fixed(MASK_PENALTY, fx)?;
        let adds: Vec<RingValue> = mask
            .iter()
            .map(|&hidden| if hidden { penalty } else { RingValue::ZERO })
            .collect();
        x = x.add_public(ctx.id, &adds)?;
    }
    if temperature != 1.0 {
        x = scale_const(ctx, &x, 1.0 / temperature)?;
    }
    let row_max = max_last_axis(ctx, &x)?;
    let centered = x.sub_shared(&expand_last(&row_max, n))?;
    let e = exp_approx(ctx, &centered)?;
    let sums = row_sum(&e)?;
    let inv = recip_approx(ctx, &sums)?;
    let prod = mul(ctx, &e, &expand_last(&inv, n))?;
    let mut out = trunc(ctx, &prod, fx.fractional_bits)?;
    out.shape = logits.shape.clone();
    Ok(out)
}

/// Layer normalization along the last axis with public or shared gain and
/// bias: `(x - mean) * rsqrt(var + eps) * gamma + beta`.
pub fn mpc_layernorm(
    ctx: &mut PartyCtx,
    x: &SharedTensor,
    gamma: &WeightRepr,
    beta: &WeightRepr,
    eps: f64,
) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(x.scale)?;
    let &[m, d] = &x.shape[..] else {
        return Err(Error::Shape(format!("layernorm wants rank 2, got {:?}", x.shape)));
    };
    let mean = scale_const(ctx, &row_sum(x)?, 1.0 / d as f64)?;
    let centered = x.sub_shared(&expand_last(&mean, d))?;
    let sq_raw = mul(ctx, &centered, &centered)?;
    let sq = trunc(ctx, &sq_raw, fx.fractional_bits)?;
    let var = scale_const(ctx, &row_sum(&sq)?, 1.0 / d as f64)?
        .add_public(ctx.id, &vec![encode_fixed(eps, fx)?; m])?;
    let inv = rsqrt_approx(ctx, &var)?;
    let normed_raw = mul(ctx, &centered, &expand_last(&inv, d))?;
    let normed = trunc(ctx, &normed_raw, fx.fractional_bits)?;
    let scaled = match gamma {
        WeightRepr::Public(g) => {
            let wide: Vec<RingValue> = (0..m * d).map(|k| g.data[k % d]).collect();
            trunc(ctx, &normed.mul_public(&wide, g.scale)?, fx.fractional_bits)?
        }
        WeightRepr::Shared(g) => {
            let wide = tile_rows(g, m);
            let raw = mul(ctx, &normed, &wide)?;
            trunc(ctx, &raw, fx.fractional_bits)?
        }
    };
    match beta {
        WeightRepr::Public(b) => {
            let wide: Vec<RingValue> = (0..m * d).map(|k| b.data[k % d]).collect();
            scaled.add_public(ctx.id, &wide)
        }
        WeightRepr::Shared(b) => scaled.add_shared(&tile_rows(b, m)),
    }
}

/// Causal attention mask for a `seq x seq` score matrix: `true` marks
/// positions a query must not see (keys strictly in its future).
pub fn causal_mask(seq: usize) -> Vec<bool> {
    let mut mask = vec![false; seq * seq];
    for i in 0..seq {
        for j in (i + 1)..seq {
            mask[i * seq + j] = true;
        }
    }
    mask
}

pub(crate) fn head_slice(x: &SharedTensor, heads: usize, h: usize) -> SharedTensor {
    let &[seq, d] = &x.shape[..] else { unreachable!() };
    let dh = d / heads;
    let data = (0..seq)
        .flat_map(|i| x.data[i * d + h * dh..i * d + (h + 1) * dh].to_vec())
        .collect();
    SharedTensor {
        shape: vec![seq, dh],
        scale: x.scale,
        data,
    }
}

/// Multi-head scaled dot-product attention with optional causal masking and
/// the output projection `W_O`. Per head: `softmax(q k^T / sqrt(d_h)) v`;
/// the softmax over all heads runs as one batch.
pub fn mpc_attention(
    ctx: &mut PartyCtx,
    q: &SharedTensor,
    k: &SharedTensor,
    v: &SharedTensor,
    heads: usize,
    causal: bool,
    w_o: &WeightRepr,
) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(q.scale)?;
    let &[seq, d] = &q.shape[..] else {
        return Err(Error::Shape(format!("attention wants rank 2, got {:?}", q.shape)));
    };
    if k.shape != q.shape || v.shape != q.shape {
        return Err(Error::Shape("q, k, v shapes differ".into()));
    }
    if d % heads != 0 {
        return Err(Error::Shape(format!("{d} not divisible into {heads} heads")));
    }
    let dh = d / heads;
    let mut scores = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = head_slice(q, heads, h);
        let kt = transpose(&head_slice(k, heads, h))?;
        let raw = matmul(ctx, &qh, &kt)?;
        scores.push(trunc(ctx, &raw, fx.fractional_bits)?);
    }
    let mut stacked = concat_rows(&scores);
    stacked = scale_const(ctx, &stacked, 1.0 / (dh as f64).sqrt())?;
    let mask = causal.then(|| {
        let per_head = causal_mask(seq);
        (0..heads).flat_map(|_| per_head.iter().copied()).collect::<Vec<bool>>()
    });
    let probs = mpc_softmax(ctx, &stacked, 1.0, mask.as_deref())?;
    let mut out_heads = Vec::with_capacity(heads);
    for h in 0..heads {
        let ph = SharedTensor {
            shape: vec![seq, seq],
            scale: probs.scale,
            data: probs.data[h * seq * seq..(h + 1) * seq * seq].to_vec(),
        };
        let vh = head_slice(v, heads, h);
        let raw = matmul(ctx, &ph, &vh)?;
        out_heads.push(trunc(ctx, &raw, fx.fractional_bits)?);
    }
    // interleave heads back into [seq, d]
    let mut data = Vec::with_capacity(seq * d);
    for i in 0..seq {
        for oh in &out_heads {
            data.extend_from_slice(&oh.data[i * dh..(i + 1) * dh]);
        }
    }
    let merged = SharedTensor::new(vec![seq, d], fx.fractional_bits, data)?;
    mpc_linear(ctx, &merged, w_o, None)
}

/// Per-layer key/value rows retained across autoregressive steps.
#[derive(Debug, Clone)]
pub struct KvCache {
    pub k: SharedTensor,
    pub v: SharedTensor,
}

/// The full secure forward pass: per layer, layer norm, Q/K/V projections,
/// attention, residual, layer norm, feed-forward with piecewise GELU,
/// residual; then the output head to vocabulary logits.
pub fn secure_forward(
    ctx: &mut PartyCtx,
    x: &SharedTensor,
    model: &EncodedModel,
) -> Result<SharedTensor> {
    forward_pass(ctx, x, model, None)
}

/// [`secure_forward`], optionally capturing each layer's projected keys and
/// values for context caching.
pub(crate) fn forward_pass(
    ctx: &mut PartyCtx,
    x: &SharedTensor,
    model: &EncodedModel,
    mut record: Option<&mut Vec<KvCache>>,
) -> Result<SharedTensor> {
    if model.cfg.gelu_mode == GeluMode::ExactReference {
        return Err(Error::Validation(
            "exact GELU is a plaintext reference mode; secure execution requires the piecewise form".into(),
        ));
    }
    let &[seq, d] = &x.shape[..] else {
        return Err(Error::Shape(format!("expected [seq, d] input, got {:?}", x.shape)));
    };
    if d != model.cfg.d_model {
        return Err(Error::Shape(format!("input width {d} vs d_model {}", model.cfg.d_model)));
    }
    if seq > model.cfg.max_seq {
        return Err(Error::Capacity(format!(
            "sequence {seq} exceeds max_seq {}",
            model.cfg.max_seq
        )));
    }
    let mut h = x.clone();
    for layer in &model.layers {
        h = ctx.in_phase(Phase::Linear, |ctx| {
            mpc_layernorm(ctx, &h, &layer.ln1_gamma, &layer.ln1_beta, LAYERNORM_EPS)
        })?;
        let q = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_q, None))?;
        let k = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_k, None))?;
        let v = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_v, None))?;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(KvCache {
                k: k.clone(),
                v: v.clone(),
            });
        }
        let a = mpc_attention(ctx, &q, &k, &v, model.cfg.heads, true, &layer.w_o)?;
        h = h.add_shared(&a)?;
        h = ctx.in_phase(Phase::Linear, |ctx| {
            mpc_layernorm(ctx, &h, &layer.ln2_gamma, &layer.ln2_beta, LAYERNORM_EPS)
        })?;
        let inner = ctx.in_phase(Phase::Linear, |ctx| {
            mpc_linear(ctx, &h, &layer.w1, Some(&layer.b1))
        })?;
        let act = ctx.in_phase(Phase::Gelu, |ctx| mpc_gelu(ctx, &inner))?;
        let f = ctx.in_phase(Phase::Linear, |ctx| {
            mpc_linear(ctx, &act, &layer.w2, Some(&layer.b2))
        })?;
        h = h.add_shared(&f)?;
    }
    ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &model.head, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{run_in_process, SessionConfig};
    use crate::nn::model::{ModelConfig, ModelWeights};
    use crate::plain::{gelu_reference, plain_forward, Arithmetic};
    use crate::ring::{decode_slice, encode_slice};
    use crate::sharing::{reconstruct_tensor, share_tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fx() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    /// Shares `values` with shape `shape`, runs `f` on all three parties and
    /// returns the reconstructed, decoded output.
    fn run_shared<F>(values: &[f64], shape: Vec<usize>, seed: u64, f: F) -> Vec<f64>
    where
        F: Fn(&mut PartyCtx, &SharedTensor) -> Result<SharedTensor> + Sync,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = encode_slice(values, fx()).unwrap();
        let shares = share_tensor(&enc, shape, fx().fractional_bits, &mut rng);
        let cfg = SessionConfig::in_process(seed, fx());
        let report = run_in_process(&cfg, |ctx| {
            let x = shares[ctx.id.index()].clone();
            f(ctx, &x)
        })
        .unwrap();
        decode_slice(&reconstruct_tensor(&report.outputs).unwrap(), fx())
    }

    fn public(values: &[f64], shape: Vec<usize>) -> WeightRepr {
        WeightRepr::Public(PublicTensor::encode(values, shape, fx()).unwrap())
    }

    #[test]
    fn linear_identity_passes_through() {
        let d = 4;
        let mut w = vec![0.0; d * d];
        for i in 0..d {
            w[i * d + i] = 1.0;
        }
        let x = [0.5, -1.25, 2.0, -0.0625, 3.5, 0.75, -2.5, 1.0];
        let wrepr = public(&w, vec![d, d]);
        let out = run_shared(&x, vec![2, d], 101, |ctx, xs| {
            ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, xs, &wrepr, None))
        });
        for (a, b) in x.iter().zip(&out) {
            assert!((a - b).abs() <= 2.0 * fx().ulp(), "{a} vs {b}");
        }
    }

    #[test]
    fn linear_matches_plain_matmul_with_bias() {
        let (m, n, p) = (3usize, 4usize, 5usize);
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let x: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let wrepr = public(&w, vec![n, p]);
        let brepr = public(&b, vec![p]);
        let out = run_shared(&x, vec![m, n], 103, |ctx, xs| {
            ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, xs, &wrepr, Some(&brepr)))
        });
        for i in 0..m {
            for j in 0..p {
                let want: f64 =
                    (0..n).map(|l| x[i * n + l] * w[l * p + j]).sum::<f64>() + b[j];
                let got = out[i * p + j];
                assert!((want - got).abs() < 1e-3, "[{i},{j}] {want} vs {got}");
            }
        }
    }

    #[test]
    fn linear_shared_weights_agree_with_public() {
        let (m, n, p) = (2usize, 3usize, 3usize);
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let x: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let wrepr = public(&w, vec![n, p]);
        let brepr = public(&b, vec![p]);
        let pub_out = run_shared(&x, vec![m, n], 105, |ctx, xs| {
            ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, xs, &wrepr, Some(&brepr)))
        });

        let wenc = encode_slice(&w, fx()).unwrap();
        let benc = encode_slice(&b, fx()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let wsh = share_tensor(&wenc, vec![n, p], fx().fractional_bits, &mut rng);
        let bsh = share_tensor(&benc, vec![p], fx().fractional_bits, &mut rng);
        let shr_out = run_shared(&x, vec![m, n], 105, |ctx, xs| {
            let wr = WeightRepr::Shared(wsh[ctx.id.index()].clone());
            let br = WeightRepr::Shared(bsh[ctx.id.index()].clone());
            ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, xs, &wr, Some(&br)))
        });
        for (a, b) in pub_out.iter().zip(&shr_out) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn gelu_branch_values() {
        let xs = [-4.0, -3.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0];
        let out = run_shared(&xs, vec![xs.len()], 107, |ctx, x| {
            ctx.in_phase(Phase::Gelu, |ctx| mpc_gelu(ctx, x))
        });
        for (&x, &got) in xs.iter().zip(&out) {
            let want = gelu_reference(x, GeluMode::PaperPiecewise);
            assert!(
                (want - got).abs() <= 2.0 * fx().ulp(),
                "gelu({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn gelu_keeps_shape() {
        let xs = [0.25, -0.25, 1.5, -1.5, 2.5, -2.5];
        let out = run_shared(&xs, vec![2, 3], 108, |ctx, x| {
            let y = ctx.in_phase(Phase::Gelu, |ctx| mpc_gelu(ctx, x))?;
            assert_eq!(y.shape, vec![2, 3]);
            Ok(y)
        });
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn softmax_rows_normalize_and_order() {
        let logits = [0.0, 2f64.ln(), 1.0, 1.0, 1.0, 1.0];
        let out = run_shared(&logits, vec![3, 2], 109, |ctx, x| {
            ctx.in_phase(Phase::Softmax, |ctx| mpc_softmax(ctx, x, 1.0, None))
        });
        // softmax([0, ln 2]) = [1/3, 2/3]
        assert!((out[0] - 1.0 / 3.0).abs() < 0.01, "{}", out[0]);
        assert!((out[1] - 2.0 / 3.0).abs() < 0.01, "{}", out[1]);
        // equal logits split evenly
        assert!((out[2] - 0.5).abs() < 0.01 && (out[3] - 0.5).abs() < 0.01);
        for row in out.chunks(2) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 0.01, "row sums to {s}");
        }
    }

    #[test]
    fn softmax_mask_and_temperature() {
        let logits = [1.0, 5.0, 1.0, 3.0, 1.0, 1.0];
        let mask = [false, true, false, false, false, false];
        let out = run_shared(&logits, vec![2, 3], 110, |ctx, x| {
            ctx.in_phase(Phase::Softmax, |ctx| mpc_softmax(ctx, x, 2.0, Some(&mask)))
        });
        // masked position vanishes; remaining two equal logits split evenly
        assert!(out[1] < 0.01, "masked prob {}", out[1]);
        assert!((out[0] - 0.5).abs() < 0.02 && (out[2] - 0.5).abs() < 0.02);
        // second row: plain softmax of [3,1,1]/T with T=2
        let e: Vec<f64> = [3.0f64, 1.0, 1.0].iter().map(|v| (v / 2.0).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..3 {
            assert!((out[3 + j] - e[j] / z).abs() < 0.02, "{}", out[3 + j]);
        }
    }

    #[test]
    fn layernorm_constant_rows_give_beta() {
        let x = [0.75; 8];
        let gamma = public(&[1.5, 1.5, 1.5, 1.5], vec![4]);
        let beta = public(&[0.1, -0.2, 0.3, -0.4], vec![4]);
        let out = run_shared(&x, vec![2, 4], 111, |ctx, xs| {
            ctx.in_phase(Phase::Linear, |ctx| {
                mpc_layernorm(ctx, xs, &gamma, &beta, LAYERNORM_EPS)
            })
        });
        let want = [0.1, -0.2, 0.3, -0.4, 0.1, -0.2, 0.3, -0.4];
        for (a, b) in want.iter().zip(&out) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn layernorm_matches_float_reference() {
        let d = 8usize;
        let mut rng = ChaCha8Rng::seed_from_u64(112);
        let x: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let gamma: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let grepr = public(&gamma, vec![d]);
        let brepr = public(&beta, vec![d]);
        let out = run_shared(&x, vec![2, d], 113, |ctx, xs| {
            ctx.in_phase(Phase::Linear, |ctx| {
                mpc_layernorm(ctx, xs, &grepr, &brepr, LAYERNORM_EPS)
            })
        });
        for i in 0..2 {
            let row = &x[i * d..(i + 1) * d];
            let mean: f64 = row.iter().sum::<f64>() / d as f64;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
            for j in 0..d {
                let want = (row[j] - mean) * inv * gamma[j] + beta[j];
                let got = out[i * d + j];
                assert!((want - got).abs() < 0.02, "[{i},{j}] {want} vs {got}");
            }
        }
    }

    #[test]
    fn attention_single_position_is_value_projection() {
        let d = 4usize;
        let mut rng = ChaCha8Rng::seed_from_u64(114);
        let qkv: Vec<f64> = (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wo: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let worepr = public(&wo, vec![d, d]);
        // with one position the attention weights collapse to 1 and the
        // output is just v * W_O
        let out = run_shared(&qkv, vec![3, d], 115, |ctx, xs| {
            let row = |i: usize| SharedTensor {
                shape: vec![1, d],
                scale: xs.scale,
                data: xs.data[i * d..(i + 1) * d].to_vec(),
            };
            mpc_attention(ctx, &row(0), &row(1), &row(2), 2, true, &worepr)
        });
        let v = &qkv[2 * d..];
        for j in 0..d {
            let want: f64 = (0..d).map(|l| v[l] * wo[l * d + j]).sum();
            assert!((want - out[j]).abs() < 0.01, "{want} vs {}", out[j]);
        }
    }

    #[test]
    fn causal_mask_shape() {
        let m = causal_mask(3);
        assert_eq!(
            m,
            vec![false, true, true, false, false, true, false, false, false]
        );
    }

    #[test]
    fn causal_attention_ignores_future_rows() {
        // first output row must not change when later rows change
        let d = 4usize;
        let mut rng = ChaCha8Rng::seed_from_u64(116);
        let base: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut other = base.clone();
        for v in &mut other[d..] {
            *v += 0.5;
        }
        let wo: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let worepr = public(&wo, vec![d, d]);
        let run = |vals: &[f64], seed: u64| {
            run_shared(vals, vec![2, d], seed, |ctx, xs| {
                mpc_attention(ctx, xs, xs, xs, 2, true, &worepr)
            })
        };
        let a = run(&base, 117);
        let b = run(&other, 117);
        for j in 0..d {
            assert!(
                (a[j] - b[j]).abs() < 5.0 * fx().ulp(),
                "row 0 leaked the future: {} vs {}",
                a[j],
                b[j]
            );
        }
    }

    #[test]
    fn forward_close_to_float_oracle() {
        let cfg = ModelConfig::new(2, 8, 2, 16, 8).unwrap();
        let w = ModelWeights::toy(cfg, 19).unwrap();
        let model = EncodedModel::public(&w, fx()).unwrap();
        let tokens = [1usize, 7, 12, 3];
        let emb = w.embed(&tokens).unwrap();
        let out = run_shared(&emb, vec![tokens.len(), cfg.d_model], 118, |ctx, xs| {
            secure_forward(ctx, xs, &model)
        });
        let float = plain_forward(&emb, &w, fx(), Arithmetic::Float).unwrap();
        let max_gap = out
            .iter()
            .zip(&float)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_gap <= 0.05, "max logit gap {max_gap}");
    }

    #[test]
    fn forward_rejects_exact_gelu_and_overlong_input() {
        let mut cfg = ModelConfig::new(1, 8, 2, 16, 2).unwrap();
        let w = ModelWeights::toy(cfg, 20).unwrap();
        let model = EncodedModel::public(&w, fx()).unwrap();
        cfg.gelu_mode = GeluMode::ExactReference;
        let mut exact = model.clone();
        exact.cfg = cfg;
        let session = SessionConfig::in_process(119, fx());
        run_in_process(&session, |ctx| {
            let x = SharedTensor::zeros(vec![2, 8], fx().fractional_bits);
            assert!(matches!(
                secure_forward(ctx, &x, &exact),
                Err(Error::Validation(_))
            ));
            let long = SharedTensor::zeros(vec![3, 8], fx().fractional_bits);
            assert!(matches!(
                secure_forward(ctx, &long, &model),
                Err(Error::Capacity(_))
            ));
            Ok(())
        })
        .unwrap();
    }
}

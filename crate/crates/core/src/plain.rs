//! Plaintext oracles: float and fixed-point transformer forward passes
//! sharing one generic implementation, exact and piecewise GELU references,
//! and approximation error profiling.
//!
//! The float engine mirrors the *algorithms* of the secure kernels (limit
//! exponential, Newton reciprocal and inverse square root, piecewise GELU)
//! in `f64`, so secure-vs-float gaps measure fixed-point noise rather than
//! algorithm differences. The fixed engine mirrors the exact truncation
//! schedule of the secure kernels with deterministic floor truncation; the
//! secure path's probabilistic truncation differs from it by at most one
//! unit per truncation.

use crate::error::{Error, Result};
use crate::nn::{causal_mask, GeluMode, ModelWeights, LAYERNORM_EPS, MASK_PENALTY};
use crate::proto::{EXP_SQUARINGS, RECIP_ITERS, RSQRT_ITERS};
use crate::ring::{decode_fixed, encode_fixed, FixedPointConfig, RingValue};
use statrs::function::erf::erf;

/// Scalar arithmetic the reference engine is generic over.
pub trait Num: Copy + Send + Sync {
    fn from_f64(v: f64, fx: FixedPointConfig) -> Self;
    fn to_f64(self, fx: FixedPointConfig) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn neg(self) -> Self;
    /// Product rescaled back to working precision (one truncation).
    fn mul(self, o: Self, fx: FixedPointConfig) -> Self;
    /// Division by `2^bits` (one truncation).
    fn shr(self, bits: u32, fx: FixedPointConfig) -> Self;
    fn lt(self, o: Self) -> bool;
    /// Inner product accumulated at double precision plus an optional bias,
    /// then a single truncation — the schedule of the secure linear kernel.
    fn dot(a: &[Self], b: &[Self], bias: Option<Self>, fx: FixedPointConfig) -> Self;
}

impl Num for f64 {
    fn from_f64(v: f64, _fx: FixedPointConfig) -> f64 {
        v
    }
    fn to_f64(self, _fx: FixedPointConfig) -> f64 {
        self
    }
    fn add(self, o: f64) -> f64 {
        self + o
    }
    fn sub(self, o: f64) -> f64 {
        self - o
    }
    fn neg(self) -> f64 {
        -self
    }
    fn mul(self, o: f64, _fx: FixedPointConfig) -> f64 {
        self * o
    }
    fn shr(self, bits: u32, _fx: FixedPointConfig) -> f64 {
        self / (1u64 << bits) as f64
    }
    fn lt(self, o: f64) -> bool {
        self < o
    }
    fn dot(a: &[f64], b: &[f64], bias: Option<f64>, _fx: FixedPointConfig) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() + bias.unwrap_or(0.0)
    }
}

impl Num for RingValue {
    fn from_f64(v: f64, fx: FixedPointConfig) -> RingValue {
        encode_fixed(v, fx).expect("reference value inside fixed-point range")
    }
    fn to_f64(self, fx: FixedPointConfig) -> f64 {
        decode_fixed(self, fx)
    }
    fn add(self, o: RingValue) -> RingValue {
        self + o
    }
    fn sub(self, o: RingValue) -> RingValue {
        self - o
    }
    fn neg(self) -> RingValue {
        -self
    }
    fn mul(self, o: RingValue, fx: FixedPointConfig) -> RingValue {
        (self * o).arith_shr(fx.fractional_bits)
    }
    fn shr(self, bits: u32, _fx: FixedPointConfig) -> RingValue {
        self.arith_shr(bits)
    }
    fn lt(self, o: RingValue) -> bool {
        self.as_signed() < o.as_signed()
    }
    fn dot(a: &[RingValue], b: &[RingValue], bias: Option<RingValue>, fx: FixedPointConfig) -> RingValue {
        let mut acc = RingValue::ZERO;
        for (x, y) in a.iter().zip(b) {
            acc = acc + *x * *y;
        }
        if let Some(bias) = bias {
            acc = acc + RingValue(bias.0 << fx.fractional_bits);
        }
        acc.arith_shr(fx.fractional_bits)
    }
}

/// `(1 + x/256)^256`, the secure exponential's pipeline.
pub fn exp_plain<T: Num>(x: T, fx: FixedPointConfig) -> T {
    let mut y = x.shr(EXP_SQUARINGS, fx).add(T::from_f64(1.0, fx));
    for _ in 0..EXP_SQUARINGS {
        y = y.mul(y, fx);
    }
    y
}

/// Newton reciprocal with the secure kernel's seed and iteration count.
pub fn recip_plain<T: Num>(x: T, fx: FixedPointConfig) -> T {
    let e = exp_plain(x.neg().add(T::from_f64(0.5, fx)), fx);
    let mut y = e.mul(T::from_f64(3.0, fx), fx).add(T::from_f64(0.003, fx));
    let two = T::from_f64(2.0, fx);
    for _ in 0..RECIP_ITERS {
        y = y.mul(two.sub(x.mul(y, fx)), fx);
    }
    y
}

/// Newton inverse square root with the secure kernel's seed and iteration
/// count.
pub fn rsqrt_plain<T: Num>(x: T, fx: FixedPointConfig) -> T {
    let e = exp_plain(x.shr(1, fx).neg(), fx);
    let mut y = e.mul(T::from_f64(1.7, fx), fx).add(T::from_f64(0.02, fx));
    let three_halves = T::from_f64(1.5, fx);
    for _ in 0..RSQRT_ITERS {
        let half_xy2 = x.mul(y.mul(y, fx), fx).shr(1, fx);
        y = y.mul(three_halves.sub(half_xy2), fx);
    }
    y
}

/// Branch-literal piecewise GELU, following the secure kernel's operation
/// order (threshold compares, then the per-branch affine forms).
pub fn gelu_piecewise_plain<T: Num>(x: T, fx: FixedPointConfig) -> T {
    let below3 = x.lt(T::from_f64(-3.0, fx));
    let below1 = x.lt(T::from_f64(-1.0, fx));
    let below_plus1 = x.lt(T::from_f64(1.0, fx));
    let half = x.mul(T::from_f64(0.5, fx), fx);
    let mid = x.mul(T::from_f64(0.8413, fx), fx).add(T::from_f64(0.1587, fx));
    let high = x.add(T::from_f64(-0.1587, fx));
    let t = if below_plus1 { mid } else { high };
    let t = if below1 { half } else { t };
    if below3 {
        T::from_f64(0.0, fx)
    } else {
        t
    }
}

/// Plaintext GELU references.
pub fn gelu_reference(x: f64, mode: GeluMode) -> f64 {
    match mode {
        GeluMode::ExactReference => x * 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)),
        GeluMode::PaperPiecewise => {
            if x < -3.0 {
                0.0
            } else if x < -1.0 {
                0.5 * x
            } else if x < 1.0 {
                0.8413 * x + 0.1587
            } else {
                x - 0.1587
            }
        }
    }
}

fn linear<T: Num>(
    x: &[T],
    m: usize,
    n: usize,
    w: &[T],
    p: usize,
    bias: Option<&[T]>,
    fx: FixedPointConfig,
) -> Vec<T> {
    let mut out = Vec::with_capacity(m * p);
    let mut col = vec![x[0]; n];
    for i in 0..m {
        for j in 0..p {
            for l in 0..n {
                col[l] = w[l * p + j];
            }
            out.push(T::dot(&x[i * n..(i + 1) * n], &col, bias.map(|b| b[j]), fx));
        }
    }
    out
}

fn layernorm<T: Num>(
    x: &[T],
    m: usize,
    d: usize,
    gamma: &[T],
    beta: &[T],
    fx: FixedPointConfig,
) -> Vec<T> {
    let inv_d = T::from_f64(1.0 / d as f64, fx);
    let eps = T::from_f64(LAYERNORM_EPS, fx);
    let mut out = Vec::with_capacity(m * d);
    for i in 0..m {
        let row = &x[i * d..(i + 1) * d];
        let mut sum = T::from_f64(0.0, fx);
        for v in row {
            sum = sum.add(*v);
        }
        let mean = sum.mul(inv_d, fx);
        let centered: Vec<T> = row.iter().map(|v| v.sub(mean)).collect();
        let mut sq_sum = T::from_f64(0.0, fx);
        for c in &centered {
            sq_sum = sq_sum.add(c.mul(*c, fx));
        }
        let var = sq_sum.mul(inv_d, fx).add(eps);
        let inv = rsqrt_plain(var, fx);
        for (j, c) in centered.iter().enumerate() {
            out.push(c.mul(inv, fx).mul(gamma[j], fx).add(beta[j]));
        }
    }
    out
}

fn softmax<T: Num>(
    x: &[T],
    m: usize,
    n: usize,
    temperature: f64,
    mask: Option<&[bool]>,
    fx: FixedPointConfig,
) -> Vec<T> {
    let penalty = T::from_f64(MASK_PENALTY, fx);
    let mut work: Vec<T> = x.to_vec();
    if let Some(mask) = mask {
        for (v, &hidden) in work.iter_mut().zip(mask) {
            if hidden {
                *v = v.add(penalty);
            }
        }
    }
    if temperature != 1.0 {
        let inv_t = T::from_f64(1.0 / temperature, fx);
        for v in work.iter_mut() {
            *v = v.mul(inv_t, fx);
        }
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let row = &work[i * n..(i + 1) * n];
        let mut max = row[0];
        for v in &row[1..] {
            if max.lt(*v) {
                max = *v;
            }
        }
        let exps: Vec<T> = row.iter().map(|v| exp_plain(v.sub(max), fx)).collect();
        let mut sum = T::from_f64(0.0, fx);
        for e in &exps {
            sum = sum.add(*e);
        }
        let inv = recip_plain(sum, fx);
        out.extend(exps.iter().map(|e| e.mul(inv, fx)));
    }
    out
}

fn attention<T: Num>(
    q: &[T],
    k: &[T],
    v: &[T],
    seq: usize,
    d: usize,
    heads: usize,
    fx: FixedPointConfig,
) -> Vec<T> {
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt(), fx);
    let mask = causal_mask(seq);
    let mut merged = vec![T::from_f64(0.0, fx); seq * d];
    for h in 0..heads {
        let pick = |x: &[T], i: usize| -> Vec<T> { x[i * d + h * dh..i * d + (h + 1) * dh].to_vec() };
        let mut scores = Vec::with_capacity(seq * seq);
        for i in 0..seq {
            let qi = pick(q, i);
            for j in 0..seq {
                scores.push(T::dot(&qi, &pick(k, j), None, fx).mul(scale, fx));
            }
        }
        let probs = softmax(&scores, seq, seq, 1.0, Some(&mask), fx);
        for i in 0..seq {
            for c in 0..dh {
                let col: Vec<T> = (0..seq).map(|j| v[j * d + h * dh + c]).collect();
                merged[i * d + h * dh + c] =
                    T::dot(&probs[i * seq..(i + 1) * seq], &col, None, fx);
            }
        }
    }
    merged
}

/// Which scalar engine [`plain_forward`] runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Float,
    Fixed,
}

fn enc<T: Num>(vs: &[f64], fx: FixedPointConfig) -> Vec<T> {
    vs.iter().map(|&v| T::from_f64(v, fx)).collect()
}

fn forward<T: Num>(
    x: &[T],
    seq: usize,
    w: &ModelWeights,
    fx: FixedPointConfig,
) -> Vec<T> {
    let cfg = w.cfg;
    let d = cfg.d_model;
    let mut h: Vec<T> = x.to_vec();
    for layer in &w.layers {
        let g1: Vec<T> = enc(&layer.ln1_gamma, fx);
        let b1n: Vec<T> = enc(&layer.ln1_beta, fx);
        h = layernorm(&h, seq, d, &g1, &b1n, fx);
        let q = linear(&h, seq, d, &enc::<T>(&layer.w_q, fx), d, None, fx);
        let k = linear(&h, seq, d, &enc::<T>(&layer.w_k, fx), d, None, fx);
        let v = linear(&h, seq, d, &enc::<T>(&layer.w_v, fx), d, None, fx);
        let heads_out = attention(&q, &k, &v, seq, d, cfg.heads, fx);
        let a = linear(&heads_out, seq, d, &enc::<T>(&layer.w_o, fx), d, None, fx);
        for (hv, av) in h.iter_mut().zip(&a) {
            *hv = hv.add(*av);
        }
        let g2: Vec<T> = enc(&layer.ln2_gamma, fx);
        let b2n: Vec<T> = enc(&layer.ln2_beta, fx);
        h = layernorm(&h, seq, d, &g2, &b2n, fx);
        let inner = linear(
            &h,
            seq,
            d,
            &enc::<T>(&layer.w1, fx),
            cfg.d_ff(),
            Some(&enc::<T>(&layer.b1, fx)),
            fx,
        );
        let act: Vec<T> = match cfg.gelu_mode {
            GeluMode::PaperPiecewise => inner
                .iter()
                .map(|&v| gelu_piecewise_plain(v, fx))
                .collect(),
            GeluMode::ExactReference => inner
                .iter()
                .map(|&v| {
                    T::from_f64(gelu_reference(v.to_f64(fx), GeluMode::ExactReference), fx)
                })
                .collect(),
        };
        let f = linear(
            &act,
            seq,
            cfg.d_ff(),
            &enc::<T>(&layer.w2, fx),
            d,
            Some(&enc::<T>(&layer.b2, fx)),
            fx,
        );
        for (hv, fv) in h.iter_mut().zip(&f) {
            *hv = hv.add(*fv);
        }
    }
    linear(&h, seq, d, &enc::<T>(&w.head, fx), cfg.vocab, None, fx)
}

/// Reference forward pass over real-valued embeddings `[seq, d]`, returning
/// decoded logits `[seq, vocab]`. Bit-reproducible per arithmetic mode.
pub fn plain_forward(
    x: &[f64],
    w: &ModelWeights,
    fx: FixedPointConfig,
    mode: Arithmetic,
) -> Result<Vec<f64>> {
    let d = w.cfg.d_model;
    if x.is_empty() || x.len() % d != 0 {
        return Err(Error::Shape(format!(
            "embedding length {} not a multiple of d={d}",
            x.len()
        )));
    }
    let seq = x.len() / d;
    if seq > w.cfg.max_seq {
        return Err(Error::Capacity(format!(
            "sequence {seq} exceeds max_seq {}",
            w.cfg.max_seq
        )));
    }
    Ok(match mode {
        Arithmetic::Float => forward::<f64>(x, seq, w, fx),
        Arithmetic::Fixed => {
            let enc_x: Vec<RingValue> = enc(x, fx);
            forward::<RingValue>(&enc_x, seq, w, fx)
                .into_iter()
                .map(|v| decode_fixed(v, fx))
                .collect()
        }
    })
}

/// Greedy plaintext generation: full forward per step, argmax of the last
/// row's logits.
pub fn plain_generate(
    prompt: &[usize],
    steps: usize,
    w: &ModelWeights,
    fx: FixedPointConfig,
    mode: Arithmetic,
) -> Result<Vec<usize>> {
    let mut tokens = prompt.to_vec();
    for _ in 0..steps {
        let x = w.embed(&tokens)?;
        let logits = plain_forward(&x, w, fx, mode)?;
        let last = &logits[(tokens.len() - 1) * w.cfg.vocab..];
        let next = last
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        tokens.push(next);
    }
    Ok(tokens[prompt.len()..].to_vec())
}

/// Tabulated divergence between two scalar functions over a uniform grid.
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    pub xs: Vec<f64>,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub max_error: f64,
    pub mean_error: f64,
    /// Grid point where the divergence peaks.
    pub argmax_x: f64,
}

pub fn approx_error_profile(
    f_exact: impl Fn(f64) -> f64,
    f_approx: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<ErrorProfile> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::Range(format!("bad profile domain [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step).floor() as usize + 1;
    let mut profile = ErrorProfile {
        xs: Vec::with_capacity(n),
        exact: Vec::with_capacity(n),
        approx: Vec::with_capacity(n),
        abs_error: Vec::with_capacity(n),
        max_error: 0.0,
        mean_error: 0.0,
        argmax_x: lo,
    };
    for i in 0..n {
        let x = lo + i as f64 * step;
        let e = f_exact(x);
        let a = f_approx(x);
        let err = (e - a).abs();
        if err > profile.max_error {
            profile.max_error = err;
            profile.argmax_x = x;
        }
        profile.mean_error += err;
        profile.xs.push(x);
        profile.exact.push(e);
        profile.approx.push(a);
        profile.abs_error.push(err);
    }
    profile.mean_error /= n as f64;
    Ok(profile)
}

impl ErrorProfile {
    /// CSV with columns `x, exact, approx, abs_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,exact,approx,abs_error\n");
        for i in 0..self.xs.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.xs[i], self.exact[i], self.approx[i], self.abs_error[i]
            ));
        }
        out
    }
}

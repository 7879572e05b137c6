//! Elementary functions from ring arithmetic alone: exponential via the
//! compound-interest limit, reciprocal and inverse square root via Newton
//! iterations seeded from the exponential. No lookup tables, no opening of
//! intermediate values.

use crate::error::{Error, Result};
use crate::net::PartyCtx;
use crate::proto::mul::mul;
use crate::proto::trunc::trunc;
use crate::ring::{encode_fixed, FixedPointConfig, RingValue};
use crate::sharing::SharedTensor;

/// Input range where [`exp_approx`] tracks `e^x`: below, the output decays
/// toward zero with growing relative (but vanishing absolute) error; above,
/// the limit approximation itself drifts.
pub const EXP_DOMAIN: (f64, f64) = (-16.0, 4.0);

/// Input range where [`recip_approx`] meets its accuracy bound.
pub const RECIP_DOMAIN: (f64, f64) = (0.0625, 256.0);

/// Input range where [`rsqrt_approx`] meets its accuracy bound.
pub const RSQRT_DOMAIN: (f64, f64) = (0.0625, 256.0);

/// `(1 + x/2^k)^(2^k)` with `k = 8`: one truncation and eight secure
/// squarings. Public so the plaintext oracles mirror the same pipeline.
pub const EXP_SQUARINGS: u32 = 8;
pub const RECIP_ITERS: u32 = 12;
pub const RSQRT_ITERS: u32 = 14;

fn fx_of(x: &SharedTensor) -> Result<FixedPointConfig> {
    FixedPointConfig::new(x.scale)
}

fn const_vec(r: f64, n: usize, fx: FixedPointConfig) -> Result<Vec<RingValue>> {
    Ok(vec![encode_fixed(r, fx)?; n])
}

/// Divides the represented value by `2^shift` while keeping the scale, i.e.
/// a secure multiplication by the public constant `2^-shift`.
fn halve_pow(ctx: &mut PartyCtx, x: &SharedTensor, shift: u32) -> Result<SharedTensor> {
    let scale = x.scale;
    let mut out = trunc(ctx, x, shift)?;
    out.scale = scale;
    Ok(out)
}

/// Product of two same-scale tensors, truncated back to that scale.
fn mul_fixed(ctx: &mut PartyCtx, x: &SharedTensor, y: &SharedTensor) -> Result<SharedTensor> {
    if x.scale != y.scale {
        return Err(Error::Scale {
            expected: x.scale,
            got: y.scale,
        });
    }
    let prod = mul(ctx, x, y)?;
    trunc(ctx, &prod, y.scale)
}

/// Shared exponential `e^x` over [`EXP_DOMAIN`], via
/// `(1 + x/256)^256`. Relative error grows like `x^2/512`, about 3% at the
/// top of the domain; far below zero the result underflows to 0 gracefully.
pub fn exp_approx(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let fx = fx_of(x)?;
    let base = halve_pow(ctx, x, EXP_SQUARINGS)?;
    let mut y = base.add_public(ctx.id, &const_vec(1.0, x.len(), fx)?)?;
    for _ in 0..EXP_SQUARINGS {
        y = mul_fixed(ctx, &y, &y)?;
    }
    Ok(y)
}

/// Shared reciprocal `1/x` over [`RECIP_DOMAIN`] (positive inputs).
/// Seeded with `y0 = 3 e^(0.5 - x) + 0.003` -- always inside the Newton
/// basin `(0, 2/x)` on the domain -- then `y <- y (2 - x y)`.
pub fn recip_approx(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let fx = fx_of(x)?;
    let n = x.len();
    let arg = x.neg().add_public(ctx.id, &const_vec(0.5, n, fx)?)?;
    let e = exp_approx(ctx, &arg)?;
    let scaled = e.mul_public_scalar(encode_fixed(3.0, fx)?, fx.fractional_bits);
    let mut y = trunc(ctx, &scaled, fx.fractional_bits)?
        .add_public(ctx.id, &const_vec(0.003, n, fx)?)?;
    let two = const_vec(2.0, n, fx)?;
    for _ in 0..RECIP_ITERS {
        let xy = mul_fixed(ctx, x, &y)?;
        let corr = xy.neg().add_public(ctx.id, &two)?;
        y = mul_fixed(ctx, &y, &corr)?;
    }
    Ok(y)
}

/// Shared inverse square root `1/sqrt(x)` over [`RSQRT_DOMAIN`] (positive
/// inputs). Seeded with `y0 = 1.7 e^(-x/2) + 0.02`, which stays inside the
/// basin `(0, sqrt(3/x))` across the domain, then
/// `y <- y (1.5 - 0.5 x y^2)`.
pub fn rsqrt_approx(ctx: &mut PartyCtx, x: &SharedTensor) -> Result<SharedTensor> {
    let fx = fx_of(x)?;
    let n = x.len();
    let arg = halve_pow(ctx, x, 1)?.neg();
    let e = exp_approx(ctx, &arg)?;
    let scaled = e.mul_public_scalar(encode_fixed(1.7, fx)?, fx.fractional_bits);
    let mut y = trunc(ctx, &scaled, fx.fractional_bits)?
        .add_public(ctx.id, &const_vec(0.02, n, fx)?)?;
    let three_halves = const_vec(1.5, n, fx)?;
    for _ in 0..RSQRT_ITERS {
        let y2 = mul_fixed(ctx, &y, &y)?;
        let xy2 = mul_fixed(ctx, x, &y2)?;
        let corr = halve_pow(ctx, &xy2, 1)?.neg().add_public(ctx.id, &three_halves)?;
        y = mul_fixed(ctx, &y, &corr)?;
    }
    Ok(y)
}

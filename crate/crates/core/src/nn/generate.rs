//! Autoregressive decoding over shares: prompt embedding, incremental
//! attention against cached key/value projections, and a fully oblivious
//! variant that keeps even the sampled tokens secret-shared.

use crate::error::{Error, Result};
use crate::net::{PartyCtx, Phase};
use crate::nn::kernels::{
    concat_rows, forward_pass, head_slice, matmul_public, mpc_gelu, mpc_layernorm, mpc_linear,
    mpc_softmax, scale_const, secure_forward, transpose, KvCache, LAYERNORM_EPS,
};
use crate::nn::model::{EncodedLayer, EncodedModel, WeightRepr};
use crate::proto::{argmax_last_axis, argmax_onehot, matmul, reshare, reveal, trunc};
use crate::ring::{FixedPointConfig, RingValue};
use crate::sharing::{ReplicatedShare, SharedTensor};

/// Shares of the embedding rows for a token sequence, `[tokens, d]`. With a
/// public embedding table the rows enter the sharing as public constants;
/// with a shared table each party gathers its own share rows locally.
pub fn embed_rows(
    ctx: &mut PartyCtx,
    model: &EncodedModel,
    tokens: &[usize],
) -> Result<SharedTensor> {
    let d = model.cfg.d_model;
    for &t in tokens {
        if t >= model.cfg.vocab {
            return Err(Error::Validation(format!(
                "token id {t} outside vocabulary of {}",
                model.cfg.vocab
            )));
        }
    }
    match &model.embedding {
        WeightRepr::Public(t) => {
            let mut rows = Vec::with_capacity(tokens.len() * d);
            for &tok in tokens {
                rows.extend_from_slice(&t.data[tok * d..(tok + 1) * d]);
            }
            // locally built summands are not uniform; truncation needs them
            // to be, so burn one round re-randomizing
            let raw = SharedTensor::zeros(vec![tokens.len(), d], t.scale).add_public(ctx.id, &rows)?;
            reshare(ctx, &raw)
        }
        WeightRepr::Shared(t) => {
            let data: Vec<ReplicatedShare> = tokens
                .iter()
                .flat_map(|&tok| t.data[tok * d..(tok + 1) * d].iter().copied())
                .collect();
            SharedTensor::new(vec![tokens.len(), d], t.scale, data)
        }
    }
}

fn append_rows(t: &mut SharedTensor, rows: &SharedTensor) -> Result<()> {
    if t.shape[1..] != rows.shape[1..] || t.scale != rows.scale {
        return Err(Error::Shape(format!(
            "cannot append {:?} rows to {:?}",
            rows.shape, t.shape
        )));
    }
    t.data.extend_from_slice(&rows.data);
    t.shape[0] += rows.shape[0];
    Ok(())
}

/// Attention for one new query row against all cached keys and values. The
/// query only ever sees the past, so no mask is needed.
fn attention_single(
    ctx: &mut PartyCtx,
    q: &SharedTensor,
    cache: &KvCache,
    heads: usize,
    w_o: &WeightRepr,
) -> Result<SharedTensor> {
    let fx = FixedPointConfig::new(q.scale)?;
    let d = q.shape[1];
    let dh = d / heads;
    let mut scores = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = head_slice(q, heads, h);
        let kt = transpose(&head_slice(&cache.k, heads, h))?;
        let raw = matmul(ctx, &qh, &kt)?;
        scores.push(trunc(ctx, &raw, fx.fractional_bits)?);
    }
    let mut stacked = concat_rows(&scores);
    stacked = scale_const(ctx, &stacked, 1.0 / (dh as f64).sqrt())?;
    let probs = mpc_softmax(ctx, &stacked, 1.0, None)?;
    let t = cache.k.shape[0];
    let mut out_heads = Vec::with_capacity(heads);
    for h in 0..heads {
        let ph = SharedTensor {
            shape: vec![1, t],
            scale: probs.scale,
            data: probs.data[h * t..(h + 1) * t].to_vec(),
        };
        let vh = head_slice(&cache.v, heads, h);
        let raw = matmul(ctx, &ph, &vh)?;
        out_heads.push(trunc(ctx, &raw, fx.fractional_bits)?);
    }
    let mut data = Vec::with_capacity(d);
    for oh in &out_heads {
        data.extend_from_slice(&oh.data);
    }
    let merged = SharedTensor::new(vec![1, d], fx.fractional_bits, data)?;
    mpc_linear(ctx, &merged, w_o, None)
}

/// One transformer layer applied to a single new row, extending the layer's
/// key/value cache in place. Mirrors the full pass exactly except that only
/// the new row's projections are computed.
fn incremental_layer(
    ctx: &mut PartyCtx,
    x: &SharedTensor,
    layer: &EncodedLayer,
    heads: usize,
    cache: &mut KvCache,
) -> Result<SharedTensor> {
    let mut h = ctx.in_phase(Phase::Linear, |ctx| {
        mpc_layernorm(ctx, x, &layer.ln1_gamma, &layer.ln1_beta, LAYERNORM_EPS)
    })?;
    let q = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_q, None))?;
    let k = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_k, None))?;
    let v = ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &layer.w_v, None))?;
    append_rows(&mut cache.k, &k)?;
    append_rows(&mut cache.v, &v)?;
    let a = attention_single(ctx, &q, cache, heads, &layer.w_o)?;
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
    h.add_shared(&f)
}

/// Logits for one new row using the caches filled by a prior full pass.
fn incremental_step(
    ctx: &mut PartyCtx,
    model: &EncodedModel,
    x: &SharedTensor,
    caches: &mut [KvCache],
) -> Result<SharedTensor> {
    if caches.len() != model.layers.len() {
        return Err(Error::Validation(format!(
            "{} caches for {} layers",
            caches.len(),
            model.layers.len()
        )));
    }
    let mut h = x.clone();
    for (layer, cache) in model.layers.iter().zip(caches.iter_mut()) {
        h = incremental_layer(ctx, &h, layer, model.cfg.heads, cache)?;
    }
    ctx.in_phase(Phase::Linear, |ctx| mpc_linear(ctx, &h, &model.head, None))
}

/// Argmax of the last logit row, opened to all parties.
fn open_argmax_last_row(ctx: &mut PartyCtx, logits: &SharedTensor) -> Result<usize> {
    let &[m, n] = &logits.shape[..] else {
        return Err(Error::Shape(format!("logits must be rank 2, got {:?}", logits.shape)));
    };
    let last = SharedTensor {
        shape: vec![1, n],
        scale: logits.scale,
        data: logits.data[(m - 1) * n..].to_vec(),
    };
    ctx.in_phase(Phase::Output, |ctx| {
        let (_, idx) = argmax_last_axis(ctx, &last)?;
        Ok(reveal(ctx, &idx)?[0].0 as usize)
    })
}

fn last_row(logits: &SharedTensor) -> SharedTensor {
    let &[m, n] = &logits.shape[..] else { unreachable!() };
    SharedTensor {
        shape: vec![1, n],
        scale: logits.scale,
        data: logits.data[(m - 1) * n..].to_vec(),
    }
}

/// Greedy decoding of `steps` tokens after `prompt`, opening each sampled
/// token id to all parties (one reveal per token, nothing else). With
/// `use_cache` the prompt is processed once and each later step reuses the
/// cached key/value projections; without it every step reruns the full pass
/// over the whole sequence. Both paths compute the same function.
pub fn secure_generate(
    ctx: &mut PartyCtx,
    model: &EncodedModel,
    prompt: &[usize],
    steps: usize,
    use_cache: bool,
) -> Result<Vec<usize>> {
    if prompt.is_empty() {
        return Err(Error::Validation("empty prompt".into()));
    }
    if prompt.len() + steps > model.cfg.max_seq {
        return Err(Error::Capacity(format!(
            "{} prompt tokens + {steps} steps exceed max_seq {}",
            prompt.len(),
            model.cfg.max_seq
        )));
    }
    let mut out = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(out);
    }
    if use_cache {
        let x = embed_rows(ctx, model, prompt)?;
        let mut caches = Vec::with_capacity(model.layers.len());
        let logits = forward_pass(ctx, &x, model, Some(&mut caches))?;
        let mut next = open_argmax_last_row(ctx, &logits)?;
        out.push(next);
        for _ in 1..steps {
            let row = embed_rows(ctx, model, &[next])?;
            let logits = incremental_step(ctx, model, &row, &mut caches)?;
            next = open_argmax_last_row(ctx, &logits)?;
            out.push(next);
        }
    } else {
        let mut tokens = prompt.to_vec();
        for _ in 0..steps {
            let x = embed_rows(ctx, model, &tokens)?;
            let logits = secure_forward(ctx, &x, model)?;
            let next = open_argmax_last_row(ctx, &logits)?;
            out.push(next);
            tokens.push(next);
        }
    }
    Ok(out)
}

/// Greedy decoding that never opens anything: each step's argmax is taken
/// as a shared one-hot row, the next embedding is the one-hot times the
/// embedding table, and the caller receives the one-hot shares. Zero
/// reveals; the parties learn only lengths.
pub fn secure_generate_secret(
    ctx: &mut PartyCtx,
    model: &EncodedModel,
    prompt_emb: &SharedTensor,
    steps: usize,
) -> Result<Vec<SharedTensor>> {
    let &[p, d] = &prompt_emb.shape[..] else {
        return Err(Error::Shape(format!(
            "prompt embedding must be [seq, d], got {:?}",
            prompt_emb.shape
        )));
    };
    if d != model.cfg.d_model {
        return Err(Error::Shape(format!("prompt width {d} vs d_model {}", model.cfg.d_model)));
    }
    if p + steps > model.cfg.max_seq {
        return Err(Error::Capacity(format!(
            "{p} prompt rows + {steps} steps exceed max_seq {}",
            model.cfg.max_seq
        )));
    }
    let mut x = prompt_emb.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let logits = secure_forward(ctx, &x, model)?;
        let hot = ctx.in_phase(Phase::Output, |ctx| argmax_onehot(ctx, &last_row(&logits)))?;
        let next_emb = match &model.embedding {
            WeightRepr::Public(t) => matmul_public(&hot, t)?,
            WeightRepr::Shared(t) => matmul(ctx, &hot, t)?,
        };
        append_rows(&mut x, &next_emb)?;
        out.push(hot);
    }
    Ok(out)
}

/// Decodes opened one-hot rows back to token ids; a convenience for tests
/// and for the final output step of an oblivious generation.
pub fn onehot_to_token(opened: &[RingValue]) -> Result<usize> {
    let mut hit = None;
    for (i, v) in opened.iter().enumerate() {
        match (v.0, hit) {
            (0, _) => {}
            (1, None) => hit = Some(i),
            _ => return Err(Error::Validation("not a one-hot row".into())),
        }
    }
    hit.ok_or_else(|| Error::Validation("all-zero one-hot row".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{run_in_process, CommStats, SessionConfig};
    use crate::nn::model::{ModelConfig, ModelWeights};
    use crate::ring::encode_slice;
    use crate::sharing::{reconstruct_tensor, share_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model() -> EncodedModel {
        let cfg = ModelConfig::new(1, 8, 2, 16, 12).unwrap();
        let w = ModelWeights::toy(cfg, 11).unwrap();
        EncodedModel::public(&w, FixedPointConfig::default()).unwrap()
    }

    fn generate(
        model: &EncodedModel,
        prompt: &[usize],
        steps: usize,
        use_cache: bool,
        seed: u64,
    ) -> (Vec<usize>, CommStats) {
        let cfg = SessionConfig::in_process(seed, model.fx);
        let report = run_in_process(&cfg, |ctx| {
            secure_generate(ctx, model, prompt, steps, use_cache)
        })
        .unwrap();
        let stats = report.merged_stats();
        let [a, b, c] = report.outputs;
        assert_eq!(a, b);
        assert_eq!(b, c);
        (a, stats)
    }

    #[test]
    fn cached_matches_uncached() {
        let model = toy_model();
        for (seed, prompt) in [(21u64, vec![1usize, 5, 9]), (22, vec![0, 2]), (23, vec![15])] {
            let (plainly, _) = generate(&model, &prompt, 4, false, seed);
            let (cached, _) = generate(&model, &prompt, 4, true, seed);
            assert_eq!(plainly, cached, "prompt {prompt:?}");
        }
    }

    #[test]
    fn cache_cuts_per_step_multiplications() {
        let model = toy_model();
        let prompt = [3usize, 7, 1];
        // cost of everything after the first emitted token
        let (_, unc1) = generate(&model, &prompt, 1, false, 31);
        let (_, unc5) = generate(&model, &prompt, 5, false, 31);
        let (_, cac1) = generate(&model, &prompt, 1, true, 31);
        let (_, cac5) = generate(&model, &prompt, 5, true, 31);
        let unc_tail = unc5.total_elem_muls() - unc1.total_elem_muls();
        let cac_tail = cac5.total_elem_muls() - cac1.total_elem_muls();
        let ratio = unc_tail as f64 / cac_tail as f64;
        assert!(ratio > 1.5, "elem-mul reduction only {ratio:.2}x");
    }

    #[test]
    fn secret_generation_reveals_nothing_and_agrees() {
        let model = toy_model();
        let prompt = [2usize, 9];
        let steps = 3;
        let (open_tokens, _) = generate(&model, &prompt, steps, false, 41);

        let w = ModelWeights::toy(model.cfg, 11).unwrap();
        let emb = w.embed(&prompt).unwrap();
        let enc = encode_slice(&emb, model.fx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let shares = share_tensor(
            &enc,
            vec![prompt.len(), model.cfg.d_model],
            model.fx.fractional_bits,
            &mut rng,
        );
        let cfg = SessionConfig::in_process(41, model.fx);
        let report = run_in_process(&cfg, |ctx| {
            let x = shares[ctx.id.index()].clone();
            let hots = secure_generate_secret(ctx, &model, &x, steps)?;
            assert_eq!(ctx.reveal_count, 0, "oblivious path must not reveal");
            Ok(hots)
        })
        .unwrap();
        let [h0, h1, h2] = report.outputs;
        let tokens: Vec<usize> = (0..steps)
            .map(|s| {
                let opened =
                    reconstruct_tensor(&[h0[s].clone(), h1[s].clone(), h2[s].clone()]).unwrap();
                onehot_to_token(&opened).unwrap()
            })
            .collect();
        assert_eq!(tokens, open_tokens);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = toy_model();
        let cfg = SessionConfig::in_process(51, model.fx);
        let report = run_in_process(&cfg, |ctx| {
            assert!(matches!(
                embed_rows(ctx, &model, &[99]),
                Err(Error::Validation(_))
            ));
            assert!(matches!(
                secure_generate(ctx, &model, &[1; 10], 5, true),
                Err(Error::Capacity(_))
            ));
            assert!(matches!(
                secure_generate(ctx, &model, &[], 2, false),
                Err(Error::Validation(_))
            ));
            Ok(0u8)
        });
        report.unwrap();
    }

    #[test]
    fn onehot_decoding() {
        let row: Vec<RingValue> = [0u64, 0, 1, 0].iter().map(|&v| RingValue(v)).collect();
        assert_eq!(onehot_to_token(&row).unwrap(), 2);
        let bad: Vec<RingValue> = [1u64, 1].iter().map(|&v| RingValue(v)).collect();
        assert!(onehot_to_token(&bad).is_err());
    }
}

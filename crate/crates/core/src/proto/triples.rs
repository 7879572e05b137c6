//! Beaver-triple multiplication backend.
//!
//! Triples `(a, b, c = a*b)` are dealt ahead of time; consuming one turns a
//! secure multiplication into the public opening of the masked differences
//! `d = x - a`, `e = y - b` and a local correction. This trades offline
//! material for the online zero-sharing PRG work of the native protocol and
//! serves as an independent cross-check of [`super::mul`].

use crate::error::{Error, Result};
use crate::net::{Opcode, PartyCtx};
use crate::ring::RingValue;
use crate::sharing::{share_random, ReplicatedShare, SharedTensor};
use rand::Rng;

/// One party's stash of pre-dealt multiplication triples, consumed front to
/// back.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    a: Vec<ReplicatedShare>,
    b: Vec<ReplicatedShare>,
    c: Vec<ReplicatedShare>,
    cursor: usize,
}

impl TripleStore {
    pub fn remaining(&self) -> usize {
        self.a.len() - self.cursor
    }

    fn take(&mut self, n: usize) -> Result<usize> {
        if self.remaining() < n {
            return Err(Error::Capacity(format!(
                "{n} triples requested, {} left",
                self.remaining()
            )));
        }
        let at = self.cursor;
        self.cursor += n;
        Ok(at)
    }
}

/// Dealer-side generation of `n` triples, one store per party.
pub fn deal_triples<R: Rng>(n: usize, rng: &mut R) -> [TripleStore; 3] {
    let mut stores: [TripleStore; 3] = Default::default();
    for _ in 0..n {
        let a = RingValue(rng.gen());
        let b = RingValue(rng.gen());
        let sa = share_random(a, rng);
        let sb = share_random(b, rng);
        let sc = share_random(a * b, rng);
        for i in 0..3 {
            stores[i].a.push(sa[i]);
            stores[i].b.push(sb[i]);
            stores[i].c.push(sc[i]);
        }
    }
    stores
}

/// Elementwise product using one triple per element: opens `x - a` and
/// `y - b` in a single round, then corrects locally with
/// `z = c + d*b + e*a + d*e`.
pub fn mul_with_triples(
    ctx: &mut PartyCtx,
    store: &mut TripleStore,
    x: &SharedTensor,
    y: &SharedTensor,
) -> Result<SharedTensor> {
    if x.shape != y.shape {
        return Err(Error::Shape(format!("{:?} vs {:?}", x.shape, y.shape)));
    }
    let n = x.len();
    let at = store.take(n)?;
    let (ta, tb, tc) = (
        &store.a[at..at + n],
        &store.b[at..at + n],
        &store.c[at..at + n],
    );
    // masked differences, opened together in one round
    let mut masked = Vec::with_capacity(2 * n);
    for k in 0..n {
        masked.push(ReplicatedShare::new(
            x.data[k].a - ta[k].a,
            x.data[k].b - ta[k].b,
        ));
    }
    for k in 0..n {
        masked.push(ReplicatedShare::new(
            y.data[k].a - tb[k].a,
            y.data[k].b - tb[k].b,
        ));
    }
    let mine: Vec<RingValue> = masked.iter().map(|s| s.b).collect();
    let received = ctx.exchange(Opcode::Open, &[(ctx.id.prev(), &mine)], &[ctx.id.next()])?;
    let opened: Vec<RingValue> = masked
        .iter()
        .zip(&received[0])
        .map(|(s, &missing)| s.a + s.b + missing)
        .collect();
    let (d, e) = opened.split_at(n);
    ctx.count_elem_muls(n as u64);
    let data = (0..n)
        .map(|k| {
            let mut z = ReplicatedShare::new(
                tc[k].a + tb[k].a * d[k] + ta[k].a * e[k],
                tc[k].b + tb[k].b * d[k] + ta[k].b * e[k],
            );
            // public d*e folded into summand s0
            let de = d[k] * e[k];
            match ctx.id.0 {
                0 => z.a = z.a + de,
                2 => z.b = z.b + de,
                _ => {}
            }
            z
        })
        .collect();
    SharedTensor::new(x.shape.clone(), x.scale + y.scale, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{run_in_process, Phase, SessionConfig};
    use crate::ring::FixedPointConfig;
    use crate::sharing::{reconstruct_tensor, share_tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let n = 10_000;
        let xs: Vec<RingValue> = (0..n).map(|_| RingValue(rng.gen())).collect();
        let ys: Vec<RingValue> = (0..n).map(|_| RingValue(rng.gen())).collect();
        let xsh = share_tensor(&xs, vec![n], 0, &mut rng);
        let ysh = share_tensor(&ys, vec![n], 0, &mut rng);
        let stores = deal_triples(n, &mut rng);
        let cfg = SessionConfig::in_process(82, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| {
            let x = xsh[ctx.id.index()].clone();
            let y = ysh[ctx.id.index()].clone();
            let mut store = stores[ctx.id.index()].clone();
            ctx.in_phase(Phase::Mul, |ctx| mul_with_triples(ctx, &mut store, &x, &y))
        })
        .unwrap();
        let out = reconstruct_tensor(&report.outputs).unwrap();
        for k in 0..n {
            assert_eq!(out[k], xs[k] * ys[k]);
        }
        // still one round, but double the payload of the native protocol
        let merged = report.merged_stats();
        assert_eq!(merged.rounds[Phase::Mul as usize], 1);
        assert_eq!(
            merged.phase_bytes(Phase::Mul),
            3 * (2 * n as u64 * 8 + 16)
        );
    }

    #[test]
    fn agrees_with_native_mul() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let n = 64;
        let xs: Vec<RingValue> = (0..n).map(|_| RingValue(rng.gen())).collect();
        let ys: Vec<RingValue> = (0..n).map(|_| RingValue(rng.gen())).collect();
        let xsh = share_tensor(&xs, vec![n], 0, &mut rng);
        let ysh = share_tensor(&ys, vec![n], 0, &mut rng);
        let stores = deal_triples(n, &mut rng);
        let cfg = SessionConfig::in_process(84, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| {
            let x = xsh[ctx.id.index()].clone();
            let y = ysh[ctx.id.index()].clone();
            let mut store = stores[ctx.id.index()].clone();
            ctx.in_phase(Phase::Mul, |ctx| {
                let native = crate::proto::mul(ctx, &x, &y)?;
                let beaver = mul_with_triples(ctx, &mut store, &x, &y)?;
                Ok(native.sub_shared(&beaver)?)
            })
        })
        .unwrap();
        let out = reconstruct_tensor(&report.outputs).unwrap();
        assert!(out.iter().all(|v| v.0 == 0));
    }

    #[test]
    fn exhaustion_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        let xsh = share_tensor(&[RingValue(5), RingValue(6)], vec![2], 0, &mut rng);
        let stores = deal_triples(1, &mut rng);
        let cfg = SessionConfig::in_process(86, FixedPointConfig::default());
        run_in_process(&cfg, |ctx| {
            let x = xsh[ctx.id.index()].clone();
            let mut store = stores[ctx.id.index()].clone();
            assert_eq!(store.remaining(), 1);
            let res = mul_with_triples(ctx, &mut store, &x, &x);
            assert!(matches!(res, Err(Error::Capacity(_))));
            Ok(())
        })
        .unwrap();
    }
}

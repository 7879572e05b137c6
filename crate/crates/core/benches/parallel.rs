//! Compares the rayon data-parallel path against the always-sequential
//! fallback on the two hot local loops: the row accumulation of a
//! public-weight matrix product and the per-element summand computation of
//! the multiplication protocol. Build with `--no-default-features` to make
//! the "parallel" series run the sequential code path too.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavmpc::par::{par_map, seq_map};
use uavmpc::ring::RingValue;
use uavmpc::sharing::ReplicatedShare;

fn random_shares(n: usize, rng: &mut ChaCha8Rng) -> Vec<ReplicatedShare> {
    (0..n)
        .map(|_| ReplicatedShare::new(RingValue(rng.gen()), RingValue(rng.gen())))
        .collect()
}

fn matmul_row(x: &[ReplicatedShare], w: &[RingValue], i: usize, n: usize, p: usize) -> Vec<ReplicatedShare> {
    let mut row = vec![ReplicatedShare::ZERO; p];
    for l in 0..n {
        let xs = x[i * n + l];
        for (j, out) in row.iter_mut().enumerate() {
            let c = w[l * p + j];
            *out = ReplicatedShare::new(out.a + xs.a * c, out.b + xs.b * c);
        }
    }
    row
}

fn bench_matmul_rows(c: &mut Criterion) {
    let (m, n, p) = (128usize, 128usize, 128usize);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_shares(m * n, &mut rng);
    let w: Vec<RingValue> = (0..n * p).map(|_| RingValue(rng.gen())).collect();
    let rows: Vec<usize> = (0..m).collect();

    let mut g = c.benchmark_group("matmul_public_rows");
    g.throughput(Throughput::Elements((m * n * p) as u64));
    g.bench_function(BenchmarkId::new("parallel", format!("{m}x{n}x{p}")), |b| {
        b.iter(|| par_map(&rows, |&i| matmul_row(&x, &w, i, n, p)))
    });
    g.bench_function(BenchmarkId::new("sequential", format!("{m}x{n}x{p}")), |b| {
        b.iter(|| seq_map(&rows, |&i| matmul_row(&x, &w, i, n, p)))
    });
    g.finish();
}

fn bench_mul_summands(c: &mut Criterion) {
    let n = 1usize << 16;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<(ReplicatedShare, ReplicatedShare)> = random_shares(n, &mut rng)
        .into_iter()
        .zip(random_shares(n, &mut rng))
        .collect();
    let summand = |(xs, ys): &(ReplicatedShare, ReplicatedShare)| {
        xs.a * ys.a + xs.a * ys.b + xs.b * ys.a
    };

    let mut g = c.benchmark_group("mul_summands");
    g.throughput(Throughput::Elements(n as u64));
    g.bench_function(BenchmarkId::new("parallel", n), |b| {
        b.iter(|| par_map(&pairs, summand))
    });
    g.bench_function(BenchmarkId::new("sequential", n), |b| {
        b.iter(|| seq_map(&pairs, summand))
    });
    g.finish();
}

criterion_group!(benches, bench_matmul_rows, bench_mul_summands);
criterion_main!(benches);

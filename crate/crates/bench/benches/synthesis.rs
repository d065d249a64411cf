//! Benchmarks for the synthesis pipeline: tensor fill, the TB=B solve, and
//! the full run including the transform factorizations.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rapidstab_bench::{benchmark_mu, benchmark_table};
use rapidstab_core::basis::{self, BasisFamily};
use rapidstab_core::moment::ShiftMode;
use rapidstab_core::stabilizer::{self, Synthesis};

fn bench_tensor_fill(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_tensors");
    for n in [64usize, 128, 256] {
        let table = benchmark_table(n, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &table, |b, t| {
            b.iter(|| basis::kernel_tensors(t))
        });
    }
    group.finish();
}

fn bench_tb_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("tb_eq_b_solve");
    for n in [64usize, 128] {
        let table = benchmark_table(n, 1.0);
        let family = BasisFamily::assemble(&table).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| stabilizer::solve_tb_eq_b(&family, &table).unwrap())
        });
    }
    group.finish();
}

fn bench_full_synthesis(c: &mut Criterion) {
    let mu = benchmark_mu();
    let mut group = c.benchmark_group("synthesis");
    group.sample_size(10);
    for n in [64usize, 128] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| Synthesis::run(&mu, n, 1.0, ShiftMode::Plain).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_tensor_fill, bench_tb_solve, bench_full_synthesis);
criterion_main!(benches);

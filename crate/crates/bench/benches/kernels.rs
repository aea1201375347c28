use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shuffle_bench::{antenna_instance, random_point, storage_instance, system, user_instance};
use shuffle_core::linalg::Spectral;
use shuffle_core::solvers::{min_rank_dc, svt, DcConfig, Init};
use shuffle_core::system::InverseWeight;
use shuffle_core::AffineSystem;

fn assemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for mu in [5, 7, 9] {
        let inst = storage_instance(mu, 1);
        let idx = inst.index_sets();
        g.bench_with_input(BenchmarkId::new("storage_mu", mu), &mu, |b, _| {
            b.iter(|| AffineSystem::assemble(black_box(&inst), &idx).unwrap())
        });
    }
    g.finish();
}

fn project(c: &mut Criterion) {
    let mut g = c.benchmark_group("project_affine");
    for l in [1, 2, 4] {
        let sys = system(&antenna_instance(l, 2));
        let m = random_point(&sys, 3);
        g.bench_with_input(BenchmarkId::new("antennas_l", l), &l, |b, _| {
            b.iter(|| sys.project_affine(black_box(&m)).unwrap())
        });
    }
    g.finish();
}

/// One DC step at rank 2: spectrum, truncation and projection.
fn dc_iteration(c: &mut Criterion) {
    let mut g = c.benchmark_group("dc_iteration");
    for l in [1, 2, 4] {
        let sys = system(&antenna_instance(l, 4));
        let x = sys.project_affine(&random_point(&sys, 5)).unwrap();
        g.bench_with_input(BenchmarkId::new("antennas_l", l), &l, |b, _| {
            b.iter(|| {
                let spectrum = Spectral::new(black_box(&x));
                sys.project_affine(&spectrum.truncate(&x, 2)).unwrap()
            })
        });
    }
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let sys = system(&antenna_instance(4, 6));
    let x = random_point(&sys, 7);
    c.bench_function("svt/antennas_l4", |b| b.iter(|| svt(black_box(&x), 1.0)));
}

fn weighted_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("irls_weighted_solve");
    for k in [5, 10] {
        let sys = system(&user_instance(k, 8));
        let x = random_point(&sys, 9);
        let r = sys.rows().min(8);
        let weight = InverseWeight {
            scale: 1e-2,
            basis: x.rows(0, r).into_owned(),
            diag: vec![0.5; r],
        };
        g.bench_with_input(BenchmarkId::new("users_k", k), &k, |b, _| {
            b.iter(|| sys.weighted_min_norm(black_box(&weight)).unwrap())
        });
    }
    g.finish();
}

fn min_rank(c: &mut Criterion) {
    let mut g = c.benchmark_group("min_rank_dc");
    g.sample_size(10);
    for mu in [7, 9] {
        let sys = system(&storage_instance(mu, 10));
        let cfg = DcConfig {
            init: Init::Random(10),
            ..DcConfig::default()
        };
        g.bench_with_input(BenchmarkId::new("storage_mu", mu), &mu, |b, _| {
            b.iter(|| min_rank_dc(black_box(&sys), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assemble, project, dc_iteration, spectral, weighted_solve, min_rank);
criterion_main!(benches);

//! Hot-path benchmarks: one protocol pipeline run, one quadrature-averaged
//! grid cell, a seeded trajectory batch, and the dense eigensolver kernel.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tpsim_bench::{amplitudes, hermitian, SPOT};
use tpsim_core::{
    average_fidelity_with_nodes, run_protocol, run_trajectories, GaussLegendre, ProtocolId,
    TrajectoryConfig,
};

fn protocol_pipelines(c: &mut Criterion) {
    let (x, r, q) = SPOT;
    let (alpha, beta) = amplitudes(x);
    for id in [ProtocolId::TpEwW, ProtocolId::CtpBell, ProtocolId::OriginalCtpW] {
        c.bench_function(&format!("protocol/{id}"), |b| {
            b.iter(|| run_protocol(id, black_box(alpha), beta, r, q).unwrap())
        });
    }
}

fn quadrature(c: &mut Criterion) {
    let (_, r, q) = SPOT;
    c.bench_function("average-fidelity/tp-ew-w/64-nodes", |b| {
        b.iter(|| average_fidelity_with_nodes(ProtocolId::TpEwW, black_box(r), q, 64).unwrap())
    });
    c.bench_function("quadrature/build-64-nodes", |b| {
        b.iter(|| GaussLegendre::new(black_box(64)).unwrap())
    });
}

fn trajectories(c: &mut Criterion) {
    let (x, r, q) = SPOT;
    let config = TrajectoryConfig {
        seed: 17,
        n_trajectories: 100_000,
        protocol: ProtocolId::TpEwW,
        x: Some(x),
        r,
        q,
    };
    c.bench_function("mc/tp-ew-w/100k-trajectories", |b| {
        b.iter(|| run_trajectories(black_box(&config)).unwrap())
    });
}

fn eigensolver(c: &mut Criterion) {
    for n in [8, 16] {
        let m = hermitian(n);
        c.bench_function(&format!("eig-hermitian/{n}x{n}"), |b| {
            b.iter(|| black_box(&m).eig_hermitian().unwrap())
        });
    }
}

criterion_group!(
    benches,
    protocol_pipelines,
    quadrature,
    trajectories,
    eigensolver
);
criterion_main!(benches);

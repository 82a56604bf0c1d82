use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hmimos_bench::{gains, multiuser};
use hmimos_core::correlation::joint_dof;
use hmimos_core::geometry::patch_centers;
use hmimos_core::power::water_fill;
use hmimos_core::precoding::two_layer;
use hmimos_core::{assemble_channel, Point, Role, SurfaceSpec, DEFAULT_TOL};

fn channel(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_channel");
    for side in [5, 10, 15] {
        let sc = multiuser(side, 3);
        g.bench_with_input(BenchmarkId::from_parameter(side * side), &sc, |b, sc| {
            b.iter(|| assemble_channel(black_box(sc)).unwrap())
        });
    }
    g.finish();
}

fn precoder(c: &mut Criterion) {
    let mut g = c.benchmark_group("two_layer");
    g.sample_size(20);
    for side in [5, 10] {
        let h = assemble_channel(&multiuser(side, 3)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(side * side), &h, |b, h| {
            b.iter(|| two_layer(black_box(h), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn power(c: &mut Criterion) {
    let mut g = c.benchmark_group("water_fill");
    for n in [8, 64, 512] {
        let v = gains(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| water_fill(black_box(v), 1.0, 0.1).unwrap())
        });
    }
    g.finish();
}

fn dof(c: &mut Criterion) {
    let rx: Vec<Point> = patch_centers(&SurfaceSpec::square(5, 1.0, Role::Receive))
        .unwrap()
        .into_iter()
        .map(|p| p + Point::new(0.0, 0.0, 5.0))
        .collect();
    let mut g = c.benchmark_group("joint_dof");
    g.sample_size(20);
    for side in [8, 16] {
        let tx = patch_centers(&SurfaceSpec::square(side, 8.0 / side as f64, Role::Transmit)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(side * side), &tx, |b, tx| {
            b.iter(|| joint_dof(black_box(tx), &rx, 2.0 * std::f64::consts::PI).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, channel, precoder, power, dof);
criterion_main!(benches);

//! Rayon fan-out vs the sequential fallback on the two hot paths: Monte
//! Carlo sampling and hierarchy solves (whose inner cost is the
//! Schur-complement assembly). Build with default features to get the
//! parallel side; `--no-default-features` makes both sides sequential.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use semialg_core::hierarchy::{self, HierarchyConfig};
use semialg_core::oracle::{mc_measure, mc_measure_sequential};
use semialg_core::sdp::{self, SolverConfig};
use semialg_core::{Convention, MeasureSpec, MomentOracle, MultiIndex, Poly, SemiAlgebraicSet};

fn unit_disc() -> SemiAlgebraicSet {
    let g = Poly::from_terms(
        2,
        [
            (MultiIndex::new(vec![0, 0]), 1.0),
            (MultiIndex::new(vec![2, 0]), -1.0),
            (MultiIndex::new(vec![0, 2]), -1.0),
        ],
    )
    .unwrap();
    SemiAlgebraicSet::new(2, vec![g]).unwrap()
}

fn std_gaussian() -> MeasureSpec {
    MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap()
}

fn bench_mc(c: &mut Criterion) {
    let set = unit_disc();
    let spec = std_gaussian();
    let mut group = c.benchmark_group("mc_disc_2e6");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(mc_measure(&set, &spec, 2_000_000, 42)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(mc_measure_sequential(&set, &spec, 2_000_000, 42)))
    });
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let set = unit_disc();
    let oracle = MomentOracle::new(std_gaussian());
    let f = set.constraints()[0].clone();
    let instance = semialg_core::relax::build_scheme3(&set, &oracle, 5, &f).unwrap();
    let instance = semialg_core::relax::precondition(&instance, &oracle);
    let config = SolverConfig::default();
    let mut group = c.benchmark_group("solve_disc_d5");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(sdp::solve(&instance, &config).unwrap()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(sdp::solve_sequential(&instance, &config).unwrap()))
    });
    group.finish();
}

fn bench_hierarchy(c: &mut Criterion) {
    let set = unit_disc();
    let oracle = MomentOracle::new(std_gaussian());
    let config = HierarchyConfig::new(2, 4);
    let mut group = c.benchmark_group("hierarchy_disc_d2_4");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(hierarchy::run(&set, &oracle, &config).unwrap()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(hierarchy::run_sequential(&set, &oracle, &config).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_mc, bench_solve, bench_hierarchy);
criterion_main!(benches);

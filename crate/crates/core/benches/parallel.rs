//! Sequential (one-thread pool) against parallel (all cores) runs of the hot
//! loops. Built without the `parallel` feature both variants are sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rayon::{ThreadPool, ThreadPoolBuilder};
use tomosurf::estimators::{spectral_volume, SpectralMethod, SpectralParams};
use tomosurf::forward::{apply_phi, PhiOperator};
use tomosurf::scene::{make_scene, BoxSpec, SceneSpec};
use tomosurf::segmentation::segment;
use tomosurf::{AcquisitionGeometry, GroundGrid, RadarGrid, SarStack};

struct Fixture {
    geom: AcquisitionGeometry,
    grid: GroundGrid,
    op: PhiOperator,
    stack: SarStack,
}

fn fixture() -> Fixture {
    let geom = AcquisitionGeometry::uniform(20, 2000.0, 0.031, 0.6, 6.0e5).unwrap();
    let grid = GroundGrid::new([48, 48, 20], [1.0; 3], [0.0; 3]).unwrap();
    let rg = RadarGrid::covering(&geom, &grid, RadarGrid::default_range_step(&geom, &grid)).unwrap();
    let mut spec = SceneSpec::flat(3);
    spec.boxes.push(BoxSpec {
        x: [6.0, 20.0],
        y: [8.0, 22.0],
        height: 12.0,
    });
    spec.boxes.push(BoxSpec {
        x: [26.0, 42.0],
        y: [28.0, 38.0],
        height: 16.0,
    });
    let (u, _) = make_scene(&spec, &geom, &grid).unwrap();
    let stack = apply_phi(&u, &geom, &rg).unwrap();
    let op = PhiOperator::new(&geom, &rg, &grid);
    Fixture { geom, grid, op, stack }
}

fn pools() -> [(&'static str, ThreadPool); 2] {
    let build = |n| ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    [("sequential", build(1)), ("parallel", build(0))]
}

fn bench(c: &mut Criterion) {
    let f = fixture();
    let u = vec![Complex64::new(1.0, -0.5); f.grid.len()];
    let volume = spectral_volume(
        &f.stack,
        &f.geom,
        &f.grid,
        SpectralMethod::Beamforming,
        &SpectralParams::default(),
    )
    .unwrap();
    for (name, pool) in pools() {
        let mut g = c.benchmark_group("forward");
        let mut out = vec![Complex64::default(); f.op.data_len()];
        g.bench_function(BenchmarkId::new("apply", name), |b| {
            b.iter(|| pool.install(|| f.op.apply_into(black_box(&u), &mut out)))
        });
        let mut back = vec![Complex64::default(); f.grid.len()];
        g.bench_function(BenchmarkId::new("adjoint", name), |b| {
            b.iter(|| pool.install(|| f.op.adjoint_into(black_box(&out), &mut back)))
        });
        g.finish();

        let mut g = c.benchmark_group("pipeline");
        g.sample_size(10);
        g.bench_function(BenchmarkId::new("capon", name), |b| {
            b.iter(|| {
                pool.install(|| {
                    spectral_volume(
                        &f.stack,
                        &f.geom,
                        &f.grid,
                        SpectralMethod::Capon,
                        &SpectralParams::default(),
                    )
                    .unwrap()
                })
            })
        });
        g.bench_function(BenchmarkId::new("segment", name), |b| {
            b.iter(|| pool.install(|| segment(black_box(&volume), &f.geom, 0.3).unwrap()))
        });
        g.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);

//! Parallel against sequential execution of the two sweep shapes: crossover
//! times over a run-time grid, and Jordan frames over an s-grid.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use openaqc::adiabatic::{crossover_track_options, uniform_grid, CrossoverAnalysis, CrossoverOptions};
use openaqc::dj::{DjInstance, FunctionSpec};
use openaqc::par;
use openaqc::spectral::{jordan_frame, spectrum_of, SpectralOptions};
use openaqc::GeneratorFamily;

fn crossover_sweep(c: &mut Criterion) {
    let inst = DjInstance::uniform(FunctionSpec::first_bit(1).unwrap(), 0.1).unwrap();
    let fam = inst.family().unwrap();
    let rho0 = inst.initial_state().unwrap();
    let analysis =
        CrossoverAnalysis::new(&fam, &uniform_grid(501), &crossover_track_options(), &CrossoverOptions::default()).unwrap();
    let t_grid: Vec<f64> = (0..8).map(|k| 2f64.powi(k)).collect();
    let mut group = c.benchmark_group("crossover_t_grid");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", t_grid.len()), |b| {
        b.iter(|| par::map(&t_grid, |&t| analysis.crossover_times(&rho0, t).unwrap()))
    });
    group.bench_function(BenchmarkId::new("sequential", t_grid.len()), |b| {
        b.iter(|| par::map_seq(&t_grid, |&t| analysis.crossover_times(&rho0, t).unwrap()))
    });
    group.finish();
}

fn frame_sweep(c: &mut Criterion) {
    let inst = DjInstance::uniform(FunctionSpec::first_bit(2).unwrap(), 0.1).unwrap();
    let fam = inst.family().unwrap();
    let grid = uniform_grid(64);
    let opts = SpectralOptions::default();
    let frame_at = |s: &f64| {
        let l = fam.generator(*s).unwrap().into_matrix();
        let spec = spectrum_of(&l, &opts).unwrap();
        black_box(jordan_frame(&l, &spec, &opts).unwrap())
    };
    let mut group = c.benchmark_group("frames_s_grid");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", grid.len()), |b| b.iter(|| par::map(&grid, frame_at)));
    group.bench_function(BenchmarkId::new("sequential", grid.len()), |b| b.iter(|| par::map_seq(&grid, frame_at)));
    group.finish();
}

criterion_group!(benches, crossover_sweep, frame_sweep);
criterion_main!(benches);

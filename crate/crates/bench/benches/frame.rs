use std::hint::black_box;

use carleson::{
    analysis_apply, frame_bounds, reconstruct, reference_geometric, synthesis_matrix, Complex64,
    ExponentSet,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bounds(c: &mut Criterion) {
    let spec = reference_geometric(12).unwrap();
    let lam = ExponentSet::naturals(1 << 14).unwrap();
    let mut group = c.benchmark_group("frame_bounds");
    group.sample_size(10);
    for k in [1024usize, 4096, 16384] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| {
                frame_bounds(&synthesis_matrix(&spec, &lam, 0, 12, black_box(k)).unwrap()).unwrap()
            })
        });
    }
    group.finish();
}

fn round_trip(c: &mut Criterion) {
    let spec = reference_geometric(12).unwrap();
    let lam = ExponentSet::naturals(16384).unwrap();
    let m = synthesis_matrix(&spec, &lam, 0, 12, 16384).unwrap();
    let f: Vec<Complex64> = (0..12)
        .map(|j| Complex64::new(1.0 / (j + 1) as f64, 0.5))
        .collect();
    let samples = analysis_apply(&spec, &lam, &f, 16384).unwrap();
    c.bench_function("reconstruct_12x16384", |b| {
        b.iter(|| reconstruct(black_box(&samples), &m).unwrap())
    });
}

criterion_group!(benches, bounds, round_trip);
criterion_main!(benches);

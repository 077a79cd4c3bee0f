use std::hint::black_box;

use carleson::{reference_geometric, riemann_energy, Complex64, Quadrature};
use criterion::{criterion_group, criterion_main, Criterion};

fn energy(c: &mut Criterion) {
    let spec = reference_geometric(12).unwrap();
    let f: Vec<Complex64> = (0..4).map(|j| Complex64::new(1.0, -(j as f64))).collect();
    let mut group = c.benchmark_group("riemann_energy");
    group.sample_size(10);
    for (name, q) in [
        ("trapezoid", Quadrature::Trapezoid),
        ("left", Quadrature::LeftEndpoint),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| riemann_energy(&spec, black_box(&f), 1e-3, 300.0, q).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, energy);
criterion_main!(benches);

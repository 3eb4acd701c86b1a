use bandtrace_core::inversion::{inversion_rhs, solve_inversion};
use bandtrace_core::recurrence::stieltjes_coefficients;
use bandtrace_core::{Mode, MultiBandMeasure, NewtonSettings, PointMass, Surface, Weight};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

const E1: [f64; 4] = [-1.0, -0.4, 0.0, 1.0];
const E2: [f64; 6] = [-2.0, -1.2, -0.9, 0.1, 0.5, 1.3];

fn stieltjes(c: &mut Criterion) {
    let m = MultiBandMeasure::from_edges(
        &E1,
        Weight::Constant(1.0),
        vec![PointMass {
            location: 2.0,
            weight: 0.1,
        }],
    )
    .validate()
    .unwrap();
    c.bench_function("stieltjes n=40", |b| {
        b.iter(|| stieltjes_coefficients(black_box(&m), 40).unwrap())
    });
}

fn surface(c: &mut Criterion) {
    c.bench_function("surface g=1", |b| {
        b.iter(|| Surface::new(black_box(&E1)).unwrap())
    });
    c.bench_function("surface g=2", |b| {
        b.iter(|| Surface::new(black_box(&E2)).unwrap())
    });
}

fn inversion(c: &mut Criterion) {
    let m = MultiBandMeasure::from_edges(&E2, Weight::Constant(1.0), vec![])
        .validate()
        .unwrap()
        .normalize();
    let s = Surface::new(&E2).unwrap();
    let t = inversion_rhs(&s, &m, 20, Mode::Asymptotic, &[]).unwrap();
    let settings = NewtonSettings::default();
    c.bench_function("inversion g=2 cold", |b| {
        b.iter(|| solve_inversion(&s, black_box(&t), None, &settings).unwrap())
    });
}

criterion_group!(benches, stieltjes, surface, inversion);
criterion_main!(benches);

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lambdalink::analysis::initial_state;
use lambdalink::hilbert::C64;
use lambdalink::lindblad::{evolve, evolve_subspace, IntegratorConfig, LindbladRhs};
use lambdalink::model::{LindbladModel, ModelParams};
use lambdalink::pulses::{AngleProfile, ProfileKind, Protocol, PulseSchedule};

const MHZ: f64 = 2.0 * PI * 1e6;

fn lossy_model(side_modes: usize) -> LindbladModel {
    let p = ModelParams::coherent(15.0 * MHZ, side_modes)
        .with_t1(100e-6)
        .with_t2phi(10e-6)
        .with_quality_factor(1e5);
    LindbladModel::build(&p).unwrap()
}

fn rhs(c: &mut Criterion) {
    let model = lossy_model(2);
    let mut rhs = LindbladRhs::new(&model);
    let rho = initial_state(&model.space).unwrap();
    let y: Vec<C64> = rho.matrix().as_slice().to_vec();
    let mut out = vec![C64::new(0.0, 0.0); y.len()];
    c.bench_function("rhs_full_128", |b| {
        b.iter(|| rhs.apply(black_box(10.0 * MHZ), black_box(7.0 * MHZ), &y, &mut out))
    });
}

fn evolution(c: &mut Criterion) {
    let model = lossy_model(2);
    let rho0 = initial_state(&model.space).unwrap();
    let sched = PulseSchedule::standard(Protocol::Satd, PI / 2.0, 44e-9, 15.0 * MHZ).unwrap();
    let cfg = IntegratorConfig::with_tolerance(1e-8);
    c.bench_function("evolve_subspace_5mode_satd", |b| {
        b.iter(|| evolve_subspace(black_box(&rho0), &model, &sched, &cfg, None).unwrap())
    });
    let mut group = c.benchmark_group("full_space");
    group.sample_size(10);
    group.bench_function("evolve_full_5mode_satd", |b| {
        b.iter(|| evolve(black_box(&rho0), &model, &sched, &cfg, None).unwrap())
    });
    group.finish();
}

fn theta(c: &mut Criterion) {
    let linear = AngleProfile::transfer(ProfileKind::Linear, 100e-9).unwrap();
    let quintic = AngleProfile::transfer(ProfileKind::Quintic, 100e-9).unwrap();
    let sched = PulseSchedule::new(Protocol::Satd, quintic, 15.0 * MHZ).unwrap();
    c.bench_function("theta_linear", |b| {
        b.iter(|| linear.theta(black_box(37e-9)).unwrap())
    });
    c.bench_function("theta_quintic", |b| {
        b.iter(|| quintic.theta(black_box(37e-9)).unwrap())
    });
    c.bench_function("satd_controls", |b| {
        b.iter(|| sched.controls(black_box(37e-9)).unwrap())
    });
}

criterion_group!(benches, rhs, evolution, theta);
criterion_main!(benches);

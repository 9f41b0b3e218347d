use criterion::{criterion_group, criterion_main, Criterion};
use noether_bench::{force_model, force_start, force_states, oscillator, oscillator_start};
use noether_core::dualnum::grad;
use noether_core::integrate::{midpoint, verlet};
use noether_core::poisson::{bracket, bracket_table};
use noether_core::qfock::{heisenberg, schrodinger_charge, FockSpaceCtx, DEFAULT_CUTOFF};
use noether_core::qwave::{energy_state, spectral_derivative, MomentumGrid};
use noether_core::Observable;
use std::hint::black_box;

fn gradients(c: &mut Criterion) {
    let m = force_model();
    let s = force_start();
    c.bench_function("grad/gamma_d3", |b| b.iter(|| grad(black_box(&m.gamma[2]), black_box(&s)).unwrap()));
    let h = oscillator();
    let so = oscillator_start();
    c.bench_function("grad/re_a", |b| b.iter(|| grad(black_box(&h.a[1].re), black_box(&so)).unwrap()));
}

fn brackets(c: &mut Criterion) {
    let m = force_model();
    let states = force_states(64);
    c.bench_function("bracket/t_gamma_64_states", |b| {
        b.iter(|| states.iter().map(|s| bracket(&m.t[0], &m.gamma[0], s).unwrap()).sum::<f64>())
    });
    let mut set: Vec<Observable> = m.t.iter().chain(&m.gamma).cloned().collect();
    set.push(m.system.hamiltonian.clone());
    c.bench_function("bracket/table_7x7", |b| b.iter(|| bracket_table(black_box(&set), &states[0]).unwrap()));
}

fn integrators(c: &mut Criterion) {
    let m = force_model();
    let s0 = force_start();
    c.bench_function("integrate/verlet_1e4", |b| b.iter(|| verlet(&m.system, black_box(&s0), 1e-3, 10_000).unwrap()));
    c.bench_function("integrate/midpoint_1e3", |b| b.iter(|| midpoint(&m.system, black_box(&s0), 1e-3, 1_000).unwrap()));
}

fn waves(c: &mut Criterion) {
    let grid = MomentumGrid::default_with_force(1.5).unwrap();
    let amps = energy_state(&grid, 0.4).unwrap().amps;
    c.bench_function("qwave/spectral_derivative_4096", |b| b.iter(|| spectral_derivative(&grid, black_box(&amps))));
}

fn fock(c: &mut Criterion) {
    let ctx = FockSpaceCtx::new(DEFAULT_CUTOFF, 1.3, 1.0, 0.0).unwrap();
    let (a, _) = schrodinger_charge(&ctx, 1.7);
    c.bench_function("qfock/heisenberg_16", |b| b.iter(|| heisenberg(black_box(&a), &ctx, 1.7).unwrap()));
}

criterion_group!(kernels, gradients, brackets, integrators, waves, fock);
criterion_main!(kernels);

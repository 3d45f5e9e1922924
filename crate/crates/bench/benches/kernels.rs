use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use crn_bench::{chain, ring};
use crn_core::graph::{diagonal_minors, strongly_connected_components};
use crn_core::sim::Stepper;
use crn_core::{Grid, ReactionMatrix, SimulationState, TimeScheme};

fn scc(c: &mut Criterion) {
    let net = chain(200);
    c.bench_function("scc_chain_200", |b| b.iter(|| strongly_connected_components(black_box(&net))));
}

fn minors(c: &mut Criterion) {
    let a = ReactionMatrix::from_network(&ring(8, 16));
    c.bench_function("diagonal_minors_ring_8", |b| b.iter(|| diagonal_minors(black_box(&a))));
}

fn implicit_step(c: &mut Criterion) {
    let net = ring(5, 256);
    let a = ReactionMatrix::from_network(&net);
    let grid = Grid::new(256).expect("valid grid");
    let mut stepper =
        Stepper::new(&a, net.diffusions(), &grid, 1e-3, TimeScheme::BackwardEuler, 1e-12).expect("factorizable");
    let mut state = SimulationState::initial(&net, grid);
    c.bench_function("backward_euler_step_5x256", |b| b.iter(|| stepper.advance(black_box(&mut state))));
}

criterion_group!(benches, scc, minors, implicit_step);
criterion_main!(benches);

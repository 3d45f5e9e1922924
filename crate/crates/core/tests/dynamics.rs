mod common;

use common::*;
use crn_core::entropy::{
    component_dissipation, component_entropy, entropy_dissipation, fit_decay_rate, relative_entropy,
    target_dissipation, target_entropy, verify_eed, ComponentReference, LongTimeReference, DEFAULT_FIT_FLOOR,
};
use crn_core::equilibria::{artificial_equilibrium, equilibrium_cramer, injected_mass, target_equilibrium};
use crn_core::graph::strongly_connected_components;
use crn_core::sim::{neumann_laplacian, spatial_average, Stepper};
use crn_core::{
    analyze, eed_lambda_lower_bound, parse_network, simulate, ComponentKind, Grid, InitialProfile, ReactionMatrix,
    ReactionNetwork, SimulationState, SolverConfig, TimeScheme,
};
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Semi-discrete right-hand side `D L u + A u`.
fn rhs(state: &SimulationState, net: &ReactionNetwork) -> Vec<Vec<f64>> {
    let a = ReactionMatrix::from_network(net);
    let n = state.n_species();
    (0..n)
        .map(|i| {
            let lap = neumann_laplacian(&state.fields[i], &state.grid);
            (0..state.grid.cells())
                .map(|k| net.diffusions()[i] * lap[k] + (0..n).map(|j| a.get(i, j) * state.fields[j][k]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// `d/dt sum_{i in members} int (u_i - s_i)^2 / w_i` along the semi-discrete flow.
fn quadratic_derivative(state: &SimulationState, net: &ReactionNetwork, members: &[usize], shift: &[f64], w: &[f64]) -> f64 {
    let f = rhs(state, net);
    let dx = state.grid.dx();
    members
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            state.fields[i].iter().zip(&f[i]).map(|(u, fu)| 2.0 * (u - shift[k]) / w[k] * fu).sum::<f64>() * dx
        })
        .sum()
}

fn random_state(n: usize, grid: Grid, values: &[f64]) -> SimulationState {
    let nc = grid.cells();
    let fields = (0..n).map(|i| (0..nc).map(|k| values[(i * nc + k) % values.len()]).collect()).collect();
    SimulationState { t: 0.0, fields, grid }
}

fn strongly_connected_network() -> impl Strategy<Value = ReactionNetwork> {
    (1usize..=6).prop_flat_map(|n| {
        (rate_table(n, 5), proptest::collection::vec(0.05f64..3.0, n)).prop_map(move |(mut t, d)| {
            make_reversible(n, &mut t);
            network_from_table(n, &t, d, vec![InitialProfile::Const { c: 1.0 }; n], 16)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn laplacian_sums_to_zero_and_average_is_linear(
        n in 2usize..200,
        values in proptest::collection::vec(-10.0f64..10.0, 1..64),
        other in proptest::collection::vec(-10.0f64..10.0, 1..64),
    ) {
        let grid = Grid::new(n).unwrap();
        let f: Vec<f64> = (0..n).map(|k| values[k % values.len()]).collect();
        let g: Vec<f64> = (0..n).map(|k| other[k % other.len()]).collect();
        let lap = neumann_laplacian(&f, &grid);
        let scale: f64 = lap.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(lap.iter().sum::<f64>().abs() <= 1e-13 * scale);
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let lhs = spatial_average(&sum, &grid);
        let rhs = spatial_average(&f, &grid) + spatial_average(&g, &grid);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn step_preserves_mass_and_nonnegativity(
        net in strongly_connected_network(),
        dt in 1e-4f64..0.2,
        cells in 2usize..48,
        values in proptest::collection::vec(0.0f64..5.0, 1..40),
    ) {
        let grid = Grid::new(cells).unwrap();
        let a = ReactionMatrix::from_network(&net);
        let mut state = random_state(net.n_species(), grid, &values);
        state.fields[0][0] += 1.0;
        let m0 = state.mass();
        let mut stepper = Stepper::new(&a, net.diffusions(), &grid, dt, TimeScheme::BackwardEuler, 1e-12).unwrap();
        for _ in 0..50 {
            stepper.advance(&mut state).unwrap();
            prop_assert!(state.min_value() >= -1e-12 * m0);
        }
        prop_assert!((state.mass() - m0).abs() <= 1e-10 * m0, "drift {:e}", (state.mass() - m0).abs() / m0);
    }

    #[test]
    fn dissipation_is_minus_entropy_derivative(
        net in strongly_connected_network(),
        values in proptest::collection::vec(0.0f64..4.0, 1..50),
    ) {
        let a = ReactionMatrix::from_network(&net);
        let n = net.n_species();
        let eq = equilibrium_cramer(&a, n as f64).unwrap();
        let state = random_state(n, Grid::new(16).unwrap(), &values);
        let all: Vec<usize> = (0..n).collect();
        let dedt = quadratic_derivative(&state, &net, &all, eq.values(), eq.values());
        let d = entropy_dissipation(&state, eq.values(), &net);
        prop_assert!(d >= -1e-12);
        prop_assert!((dedt + d).abs() <= 1e-9 * d.abs().max(1e-6), "{} vs {}", dedt, d);
    }

    #[test]
    fn eed_bound_holds_for_zero_mass_perturbations(
        net in strongly_connected_network(),
        cells in 2usize..24,
        values in proptest::collection::vec(-1.0f64..1.0, 1..60),
        bias in proptest::collection::vec(-1.0f64..1.0, 6),
    ) {
        let a = ReactionMatrix::from_network(&net);
        let n = net.n_species();
        let eq = equilibrium_cramer(&a, n as f64).unwrap();
        let grid = Grid::new(cells).unwrap();
        let mut w = random_state(n, grid, &values);
        // spatially constant offsets shift mass between species
        for (i, f) in w.fields.iter_mut().enumerate() {
            for v in f.iter_mut() {
                *v += bias[i];
            }
        }
        let mass = w.mass();
        for f in w.fields.iter_mut() {
            for v in f.iter_mut() {
                *v -= mass / n as f64;
            }
        }
        prop_assert!(w.mass().abs() < 1e-12);
        let state = SimulationState {
            t: 0.0,
            fields: w.fields.iter().zip(eq.values()).map(|(f, e)| f.iter().map(|v| v + e).collect()).collect(),
            grid,
        };
        let bound = eed_lambda_lower_bound(&net, eq.values(), &grid).unwrap();
        let e = relative_entropy(&state, eq.values());
        let d = entropy_dissipation(&state, eq.values(), &net);
        prop_assert!(bound.lambda > 0.0);
        prop_assert!(d >= bound.lambda * e * (1.0 - 1e-12) - 1e-14, "D = {}, lambda E = {}", d, bound.lambda * e);
    }

    #[test]
    fn component_functionals_dissipate_as_stated(
        rates in proptest::collection::vec(0.1f64..5.0, 9),
        d in proptest::collection::vec(0.0f64..2.0, 6),
        values in proptest::collection::vec(0.0f64..3.0, 1..50),
    ) {
        let edges = [(0, 1), (1, 0), (1, 2), (0, 2), (0, 3), (3, 4), (4, 3), (2, 5), (2, 3)];
        let mut table = vec![0.0; 36];
        for (&(s, t), r) in edges.iter().zip(&rates) {
            table[t * 6 + s] = *r;
        }
        let net = network_from_table(6, &table, d, vec![InitialProfile::Const { c: 1.0 }; 6], 16);
        let a = ReactionMatrix::from_network(&net);
        let dec = strongly_connected_components(&net);
        let state = random_state(6, Grid::new(16).unwrap(), &values);
        let inj = injected_mass(&a, &dec, &state.averages()).unwrap();
        for k in 0..dec.len() {
            let members = dec.components[k].clone();
            let (comp, e, diss, shift) = if dec.kinds[k] == ComponentKind::Target {
                let eq = target_equilibrium(&a, &dec, k, &state.averages(), &inj).unwrap();
                let c = ComponentReference::new(&a, &dec, k, eq);
                let e = target_entropy(&state, &c).unwrap();
                let diss = target_dissipation(&state, &c, &net).unwrap();
                let shift = c.equilibrium.values().to_vec();
                (c, e, diss, shift)
            } else {
                let eq = artificial_equilibrium(&a, &members).unwrap();
                let c = ComponentReference::new(&a, &dec, k, eq);
                let e = component_entropy(&state, &c).unwrap();
                let diss = component_dissipation(&state, &c, &net).unwrap();
                (c, e, diss, vec![0.0; members.len()])
            };
            prop_assert!(e >= 0.0);
            let dedt = quadratic_derivative(&state, &net, &members, &shift, comp.equilibrium.values());
            let scale = diss.abs().max(dedt.abs()).max(1e-6);
            prop_assert!((dedt + diss).abs() <= 1e-9 * scale, "component {}: {} vs {}", k, dedt, diss);
        }
    }
}

fn expm_average(a: &ReactionMatrix, x0: &[f64], t: f64) -> Vec<f64> {
    let m = a.to_dmatrix() * t;
    (m.exp() * DVector::from_row_slice(x0)).iter().copied().collect()
}

#[test]
fn ode_reduction_matches_matrix_exponential() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(1..=6);
        let table: Vec<f64> =
            (0..n * n).map(|_| if rng.random_bool(0.5) { rng.random_range(0.1..10.0) } else { 0.0 }).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut profiles: Vec<InitialProfile> = x0.iter().map(|&c| InitialProfile::Const { c }).collect();
        profiles[0] = InitialProfile::Const { c: x0[0] + 0.5 };
        let x0: Vec<f64> = profiles.iter().map(|p| p.mean()).collect();
        let d = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let net = network_from_table(n, &table, d, profiles, 8);
        let a = ReactionMatrix::from_network(&net);
        let dt = 1e-3;
        let grid = Grid::new(8).unwrap();
        let mut stepper = Stepper::new(&a, net.diffusions(), &grid, dt, TimeScheme::BackwardEuler, 1e-12).unwrap();
        let mut state = SimulationState::initial(&net, grid);
        for s in 1..=1000 {
            stepper.advance(&mut state).unwrap();
            if s % 250 == 0 {
                let t = s as f64 * dt;
                let exact = expm_average(&a, &x0, t);
                let tol = 5.0 * dt * a.norm_inf() * t * x0.iter().sum::<f64>() + 1e-12;
                for (u, e) in state.averages().iter().zip(&exact) {
                    assert!((u - e).abs() <= tol, "t = {t}: {u} vs {e} (tol {tol})");
                }
                // spatially constant data stays constant
                for f in &state.fields {
                    assert!(f.iter().all(|v| (v - f[0]).abs() < 1e-12));
                }
            }
        }
    }
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let net = parse_network("species A B\nrxn A -> B 1\nrxn B -> A 2\ninit A const 1\ninit B const 2\ngrid 4").unwrap();
    let a = ReactionMatrix::from_network(&net);
    let exact = expm_average(&a, &[1.0, 2.0], 1.0);
    let error = |scheme, dt: f64| {
        let grid = Grid::new(4).unwrap();
        let mut stepper = Stepper::new(&a, net.diffusions(), &grid, dt, scheme, 1e-12).unwrap();
        let mut s = SimulationState::initial(&net, grid);
        for _ in 0..(1.0 / dt).round() as usize {
            stepper.advance(&mut s).unwrap();
        }
        (s.averages()[0] - exact[0]).abs()
    };
    let be = error(TimeScheme::BackwardEuler, 0.01) / error(TimeScheme::BackwardEuler, 0.005);
    let cn = error(TimeScheme::CrankNicolson, 0.01) / error(TimeScheme::CrankNicolson, 0.005);
    assert!((be - 2.0).abs() < 0.1, "{be}");
    assert!((cn - 4.0).abs() < 0.2, "{cn}");
}

#[test]
fn laplacian_converges_at_second_order() {
    let err = |n: usize| {
        let g = Grid::new(n).unwrap();
        let u: Vec<f64> = g.centers().map(|x| (PI * x).cos()).collect();
        neumann_laplacian(&u, &g).iter().zip(&u).map(|(l, v)| (l + PI * PI * v).abs()).fold(0.0, f64::max)
    };
    let (e32, e64, e128) = (err(32), err(64), err(128));
    assert!(e128 < 1e-3);
    for ratio in [e32 / e64, e64 / e128] {
        assert!((ratio - 4.0).abs() <= 0.8, "{ratio}");
    }
}

const TWO: &str = "species A B\ndiff A 1\ndiff B 1\nrxn A -> B 1\nrxn B -> A 2\ninit A const 1\ninit B const 2\ngrid 32";

fn run(net: &ReactionNetwork, config: &SolverConfig) -> crn_core::SimulationRun {
    let an = analyze(net).unwrap();
    simulate(net, config, &an.reference).unwrap()
}

#[test]
fn two_species_reaches_equilibrium() {
    let net = parse_network(TWO).unwrap();
    let r = run(&net, &SolverConfig { t_end: 10.0, ..Default::default() });
    for (f, e) in r.final_state.fields.iter().zip([2.0, 1.0]) {
        assert!(f.iter().all(|v| (v - e).abs() < 1e-6));
    }
    let fit = fit_decay_rate(&r.trace, DEFAULT_FIT_FLOOR).unwrap();
    // backward Euler damps the -3 mode by 1/(1 + 3 dt) per step
    let expected = 2.0 * (1.0 + 3e-3f64).ln() / 1e-3;
    assert!((fit.lambda_fit - expected).abs() < 1e-6 * expected, "{}", fit.lambda_fit);
}

#[test]
fn heat_bump_flattens_with_unit_mass() {
    let net = parse_network("species U\ndiff U 1\ninit U bump 1 0.5 1\ngrid 64").unwrap();
    let r = run(&net, &SolverConfig { t_end: 3.0, ..Default::default() });
    assert!(r.final_state.fields[0].iter().all(|v| (v - 1.0).abs() < 1e-10));
    assert!((r.final_state.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn scaling_rates_and_diffusion_scales_the_decay_rate() {
    let base = parse_network(
        "species A B C\ndiff A 0.2\ndiff B 0.1\ndiff C 0.3\nrxn A -> B 1\nrxn B -> C 0.5\nrxn C -> A 0.8\nrxn B -> A 0.3\ninit A bump 1 0.5 1\ninit B const 0.2\ninit C bump 0.5 0.4 1\ngrid 32",
    )
    .unwrap();
    let scaled = base.scaled(2.0, 2.0).unwrap();
    let config = SolverConfig { t_end: 20.0, dt: 5e-4, ..Default::default() };
    let r1 = fit_decay_rate(&run(&base, &config).trace, DEFAULT_FIT_FLOOR).unwrap().lambda_fit;
    let r2 = fit_decay_rate(&run(&scaled, &config).trace, DEFAULT_FIT_FLOOR).unwrap().lambda_fit;
    assert!((r2 / r1 - 2.0).abs() <= 0.04, "{r1} -> {r2}");
}

#[test]
fn inflated_bound_is_violated_by_slow_mode_data() {
    // (2.5, 0.5) - (2, 1) lies on the eigenvector of the -3 mode
    let net = parse_network(
        "species A B\ndiff A 1\ndiff B 1\nrxn A -> B 1\nrxn B -> A 2\ninit A const 2.5\ninit B const 0.5\ngrid 16",
    )
    .unwrap();
    let an = analyze(&net).unwrap();
    let eq = an.equilibrium().unwrap().values().to_vec();
    let r = simulate(&net, &SolverConfig { t_end: 2.0, ..Default::default() }, &an.reference).unwrap();
    let bound = eed_lambda_lower_bound(&net, &eq, &Grid::new(16).unwrap()).unwrap();
    assert!((bound.lambda - 2.0).abs() < 1e-12);
    assert!(verify_eed(&r.trace, bound.lambda).passed);
    let inflated = verify_eed(&r.trace, 10.0 * bound.lambda);
    assert!(!inflated.passed);
    assert_eq!(inflated.first_violation, Some(0));
    // the trace sits exactly on the slow mode: D / E = 6
    let s = &r.trace.samples[0];
    assert!((s.dissipation / s.entropy - 6.0).abs() < 1e-12);
}

#[test]
fn equilibrium_trace_satisfies_the_bound() {
    let net = parse_network(
        "species A B\ndiff A 1\ndiff B 1\nrxn A -> B 1\nrxn B -> A 2\ninit A const 2\ninit B const 1\ngrid 8",
    )
    .unwrap();
    let r = run(&net, &SolverConfig { t_end: 0.1, ..Default::default() });
    assert!(r.trace.samples.iter().all(|s| s.entropy < 1e-28 && s.dissipation < 1e-27));
    assert!(verify_eed(&r.trace, 2.0).passed);
}

#[test]
fn component_reference_limits() {
    let net = parse_network(
        "species S1 S2 S3\ndiff S1 1\ndiff S2 1\ndiff S3 1\nrxn S1 -> S2 1\nrxn S2 -> S3 1\nrxn S3 -> S2 1\ninit S1 const 1\ngrid 8",
    )
    .unwrap();
    let an = analyze(&net).unwrap();
    let LongTimeReference::Components { components } = &an.reference else { panic!("not weakly reversible") };
    assert_eq!(components.len(), 2);
    let limit = an.reference.limit_values(3);
    assert_eq!(limit[0], 0.0);
    assert!((limit[1] - 0.5).abs() < 1e-14 && (limit[2] - 0.5).abs() < 1e-14);
}

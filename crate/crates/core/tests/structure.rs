mod common;

use common::*;
use crn_core::graph::{
    diagonal_minors, eigenvalues, gershgorin_bound, is_indecomposable_algebraic, is_weakly_reversible, minor,
    numerical_rank, strongly_connected_components, undirected_component_count,
};
use crn_core::{parse_network, ComponentKind, InitialProfile, ReactionMatrix, ReactionNetwork};
use proptest::prelude::*;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn network_strategy() -> impl Strategy<Value = ReactionNetwork> {
    (1usize..=8).prop_flat_map(|n| {
        (
            rate_table(n, 6),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], n),
            proptest::collection::vec(
                prop_oneof![
                    (0.0f64..5.0).prop_map(|c| InitialProfile::Const { c }),
                    (0.0f64..5.0, 0.0f64..5.0, 0.0f64..1.0)
                        .prop_map(|(left, right, x0)| InitialProfile::Step { left, right, x0 }),
                    (0.0f64..5.0, -1.0f64..1.0, 0u32..6)
                        .prop_map(|(c, f, mode)| InitialProfile::Bump { c, amp: f * c, mode }),
                ],
                n,
            ),
            2usize..300,
        )
            .prop_map(move |(table, d, mut p, grid)| {
                if p.iter().all(|q| q.mean() <= 0.0) {
                    p[0] = InitialProfile::Const { c: 1.0 };
                }
                network_from_table(n, &table, d, p, grid)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dsl_round_trip(net in network_strategy()) {
        let text = net.to_dsl();
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(back.to_dsl(), text);
        prop_assert_eq!(back.content_hash(), net.content_hash());
    }

    #[test]
    fn reaction_matrix_columns_sum_to_zero(net in network_strategy()) {
        let a = ReactionMatrix::from_network(&net);
        let n = a.n();
        for j in 0..n {
            let s: f64 = (0..n).map(|i| a.get(i, j)).sum();
            let scale: f64 = (0..n).map(|i| a.get(i, j).abs()).sum::<f64>().max(1.0);
            prop_assert!(s.abs() <= 1e-14 * scale);
            for i in (0..n).filter(|&i| i != j) {
                prop_assert!(a.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn profiles_are_nonnegative(net in network_strategy(), x in 0.0f64..=1.0) {
        for p in net.initial_profiles() {
            prop_assert!(p.eval(x) >= -1e-15);
        }
    }

    #[test]
    fn condensation_is_a_topologically_ordered_dag(net in network_strategy()) {
        let dec = strongly_connected_components(&net);
        let a = ReactionMatrix::from_network(&net);
        let reach = reachability(&a);
        let n = net.n_species();
        // components partition the species
        let mut seen = vec![false; n];
        for c in &dec.components {
            for &s in c {
                prop_assert!(!seen[s]);
                seen[s] = true;
            }
        }
        prop_assert!(seen.iter().all(|&b| b));
        // same component iff mutually reachable
        for i in 0..n {
            for j in 0..n {
                let same = dec.component_of[i] == dec.component_of[j];
                prop_assert_eq!(same, reach[i][j] && reach[j][i]);
            }
        }
        // every edge points forward in the order, so no cycle is possible
        for &(from, to) in &dec.condensation_edges {
            prop_assert!(from < to);
        }
        for (t, s, _) in net.reactions() {
            let (cs, ct) = (dec.component_of[s], dec.component_of[t]);
            if cs != ct {
                prop_assert!(dec.condensation_edges.contains(&(cs, ct)));
            }
        }
        for (k, kind) in dec.kinds.iter().enumerate() {
            let has_in = dec.condensation_edges.iter().any(|e| e.1 == k);
            let has_out = dec.condensation_edges.iter().any(|e| e.0 == k);
            let expected = match (has_in, has_out) {
                (_, false) => ComponentKind::Target,
                (false, true) => ComponentKind::Source,
                (true, true) => ComponentKind::Transmission,
            };
            prop_assert_eq!(*kind, expected);
        }
        prop_assert_eq!(dec.cumulative[0], 0);
        prop_assert_eq!(*dec.cumulative.last().unwrap(), n);
        for (k, c) in dec.components.iter().enumerate() {
            prop_assert_eq!(dec.cumulative[k + 1] - dec.cumulative[k], c.len());
            prop_assert_eq!(&dec.permutation[dec.cumulative[k]..dec.cumulative[k + 1]], c.as_slice());
        }
        prop_assert_eq!(undirected_component_count(&net), undirected_components_oracle(&a));
    }

    #[test]
    fn cofactor_identity(n in 2usize..=6, table in rate_table(6, 3)) {
        let net = unit_network(n, &table[..n * n]);
        let a = ReactionMatrix::from_network(&net);
        let scale = max_abs(a.entries()).max(1.0).powi(n as i32 - 1);
        for j in 0..n {
            for i in 0..n {
                for k in i + 1..n {
                    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    let lhs = minor(&a, i, j);
                    let rhs = sign * minor(&a, k, j);
                    prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()).max(1e-3 * scale),
                        "rho_{}{} = {} vs {}", i, j, lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn spectrum_inside_gershgorin_disk(n in 1usize..=8, table in rate_table(8, 5)) {
        let net = unit_network(n, &table[..n * n]);
        let a = ReactionMatrix::from_network(&net);
        let disk = gershgorin_bound(&a);
        let ev = eigenvalues(&a);
        prop_assert_eq!(ev.len(), n);
        for z in &ev {
            prop_assert!(disk.contains(*z, 1e-8), "{} outside {:?}", z, disk);
            prop_assert!(z.re <= 1e-8);
        }
        // the all-ones vector is a left null vector
        let smallest = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(smallest <= 1e-8 * disk.radius.max(1.0));
    }

    #[test]
    fn strongly_connected_means_rank_deficiency_one(n in 2usize..=8, table in rate_table(8, 5)) {
        let mut t = table[..n * n].to_vec();
        make_reversible(n, &mut t);
        let net = unit_network(n, &t);
        let a = ReactionMatrix::from_network(&net);
        prop_assert!(strongly_connected_oracle(&a));
        prop_assert_eq!(numerical_rank(&a), n - 1);
        let minors = diagonal_minors(&a);
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(minors.iter().all(|m| m.signum() == sign));
    }
}

#[test]
fn criterion_equivalence_on_connected_networks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut tested = 0;
    let mut scc = 0;
    while tested < 600 {
        let n = rng.random_range(1..=8);
        let density = rng.random_range(0.15..0.9);
        let table: Vec<f64> =
            (0..n * n).map(|_| if rng.random_bool(density) { rng.random_range(0.1..10.0) } else { 0.0 }).collect();
        let net = unit_network(n, &table);
        let a = ReactionMatrix::from_network(&net);
        if undirected_components_oracle(&a) != 1 {
            continue;
        }
        tested += 1;
        let dec = strongly_connected_components(&net);
        let oracle = strongly_connected_oracle(&a);
        let algebraic = is_indecomposable_algebraic(&a).unwrap();
        assert_eq!(dec.len() == 1, oracle, "{}", net.to_dsl());
        assert_eq!(algebraic, oracle, "{}", net.to_dsl());
        assert_eq!(is_weakly_reversible(&dec, &net), dec.components.len() == 1, "{}", net.to_dsl());
        scc += usize::from(oracle);
    }
    // both classes must actually be exercised
    assert!(scc > 100 && scc < 500, "{scc} strongly connected of {tested}");
}

#[test]
fn weakly_reversible_with_several_components_is_disconnected() {
    let net = parse_network("species A B C D\nrxn A -> B 1\nrxn B -> A 1\nrxn C -> D 1\nrxn D -> C 3\ninit A const 1")
        .unwrap();
    let dec = strongly_connected_components(&net);
    assert!(is_weakly_reversible(&dec, &net));
    assert_eq!(dec.len(), 2);
    assert_eq!(undirected_component_count(&net), 2);
    assert!(!is_indecomposable_algebraic(&ReactionMatrix::from_network(&net)).unwrap());
}

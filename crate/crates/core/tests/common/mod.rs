#![allow(dead_code)]

use std::collections::BTreeMap;

use crn_core::{InitialProfile, ReactionMatrix, ReactionNetwork};
use proptest::prelude::*;

/// Rate in `{0} U [0.1, 10]`, zero with probability about `zero_weight / 10`.
pub fn rate(zero_weight: u32) -> impl Strategy<Value = f64> {
    prop_oneof![zero_weight => Just(0.0), (10 - zero_weight) => 0.1f64..10.0]
}

/// Dense `n x n` rate table (diagonal ignored).
pub fn rate_table(n: usize, zero_weight: u32) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(rate(zero_weight), n * n)
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

pub fn network_from_table(
    n: usize,
    table: &[f64],
    diffusions: Vec<f64>,
    profiles: Vec<InitialProfile>,
    grid: usize,
) -> ReactionNetwork {
    let mut rates = BTreeMap::new();
    for t in 0..n {
        for s in 0..n {
            if t != s && table[t * n + s] > 0.0 {
                rates.insert((t, s), table[t * n + s]);
            }
        }
    }
    ReactionNetwork::new(names(n), rates, diffusions, profiles, grid).expect("generated network is valid")
}

pub fn unit_network(n: usize, table: &[f64]) -> ReactionNetwork {
    network_from_table(n, table, vec![1.0; n], vec![InitialProfile::Const { c: 1.0 }; n], 8)
}

/// Transitive closure by Floyd-Warshall; `reach[i][j]` iff `j` is
/// reachable from `i` along edges `s -> t` with `a_ts > 0`.
pub fn reachability(a: &ReactionMatrix) -> Vec<Vec<bool>> {
    let n = a.n();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j && a.get(j, i) > 0.0 {
                *cell = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn strongly_connected_oracle(a: &ReactionMatrix) -> bool {
    reachability(a).iter().all(|row| row.iter().all(|&b| b))
}

/// Union-find on the undirected reaction graph.
pub fn undirected_components_oracle(a: &ReactionMatrix) -> usize {
    let n = a.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a.get(i, j) > 0.0 {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    (0..n).filter(|&i| root(&mut parent, i) == i).count()
}

/// Adds a bidirectional ring so the network is strongly connected.
pub fn make_reversible(n: usize, table: &mut [f64]) {
    for i in 0..n {
        let j = (i + 1) % n;
        if n > 1 {
            if table[i * n + j] == 0.0 {
                table[i * n + j] = 1.0;
            }
            if table[j * n + i] == 0.0 {
                table[j * n + i] = 0.5;
            }
        }
    }
}

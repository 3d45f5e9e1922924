//! Structural analysis of the reaction graph: strongly connected
//! components and their condensation, weak reversibility, the minor
//! criterion for decomposability, balance checks and the Gershgorin disk.
//!
//! Edges run `S_j -> S_i` whenever `a_ij > 0`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{CrnError, Result};
use crate::linalg;
use crate::netparse::{ReactionMatrix, ReactionNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Source,
    Transmission,
    Target,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Source => "source",
            ComponentKind::Transmission => "transmission",
            ComponentKind::Target => "target",
        }
    }
}

/// Strongly connected components in topological order of the
/// condensation graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDecomposition {
    /// Species indices of each component, ascending within a component.
    pub components: Vec<Vec<usize>>,
    pub kinds: Vec<ComponentKind>,
    /// `(from, to)` component pairs; always `from < to`.
    pub condensation_edges: BTreeSet<(usize, usize)>,
    /// `cumulative[0] = 0`, `cumulative[i] = |C_1| + ... + |C_i|`.
    pub cumulative: Vec<usize>,
    /// `permutation[p]` is the original index of the species placed at
    /// position `p` of the component-ordered numbering.
    pub permutation: Vec<usize>,
    /// Component index of every species.
    pub component_of: Vec<usize>,
}

impl ComponentDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn non_target_species(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .components
            .iter()
            .zip(&self.kinds)
            .filter(|(_, &k)| k != ComponentKind::Target)
            .flat_map(|(c, _)| c.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Out-neighbour lists in ascending target order.
fn adjacency(net: &ReactionNetwork) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); net.n_species()];
    for (target, source, _) in net.reactions() {
        adj[source].push(target);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Tarjan's algorithm with an explicit call stack. Components come out in
/// reverse topological order.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut counter = 0;
    // (node, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut scc = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    scc.push(w);
                    if w == v {
                        break;
                    }
                }
                scc.sort_unstable();
                sccs.push(scc);
            }
        }
    }
    sccs
}

/// SCCs of the reaction graph, topologically ordered (ties broken by the
/// smallest species index in each component) and classified.
pub fn strongly_connected_components(net: &ReactionNetwork) -> ComponentDecomposition {
    let n = net.n_species();
    let adj = adjacency(net);
    let raw = tarjan_scc(&adj);

    let mut raw_of = vec![0; n];
    for (c, members) in raw.iter().enumerate() {
        for &s in members {
            raw_of[s] = c;
        }
    }
    let r = raw.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); r];
    let mut indeg = vec![0usize; r];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            let (a, b) = (raw_of[v], raw_of[w]);
            if a != b && succ[a].insert(b) {
                indeg[b] += 1;
            }
        }
    }

    // Kahn's algorithm keyed on the smallest member
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..r)
        .filter(|&c| indeg[c] == 0)
        .map(|c| Reverse((raw[c][0], c)))
        .collect();
    let mut order = Vec::with_capacity(r);
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(c);
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(Reverse((raw[d][0], d)));
            }
        }
    }
    debug_assert_eq!(order.len(), r, "condensation graph has a cycle");

    let mut rank = vec![0; r];
    for (pos, &c) in order.iter().enumerate() {
        rank[c] = pos;
    }
    let components: Vec<Vec<usize>> = order.iter().map(|&c| raw[c].clone()).collect();
    let mut condensation_edges = BTreeSet::new();
    for (a, outs) in succ.iter().enumerate() {
        for &b in outs {
            condensation_edges.insert((rank[a], rank[b]));
        }
    }
    let mut has_in = vec![false; r];
    let mut has_out = vec![false; r];
    for &(a, b) in &condensation_edges {
        has_out[a] = true;
        has_in[b] = true;
    }
    let kinds = (0..r)
        .map(|c| match (has_in[c], has_out[c]) {
            (_, false) => ComponentKind::Target,
            (false, true) => ComponentKind::Source,
            (true, true) => ComponentKind::Transmission,
        })
        .collect();

    let mut cumulative = Vec::with_capacity(r + 1);
    cumulative.push(0);
    let mut permutation = Vec::with_capacity(n);
    let mut component_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        permutation.extend_from_slice(members);
        cumulative.push(permutation.len());
        for &s in members {
            component_of[s] = c;
        }
    }

    ComponentDecomposition { components, kinds, condensation_edges, cumulative, permutation, component_of }
}

/// True iff no reaction crosses between components.
pub fn is_weakly_reversible(dec: &ComponentDecomposition, net: &ReactionNetwork) -> bool {
    net.reactions().all(|(t, s, _)| dec.component_of[t] == dec.component_of[s])
}

/// Number of pieces of the undirected reaction graph.
pub fn undirected_component_count(net: &ReactionNetwork) -> usize {
    let n = net.n_species();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, s, _) in net.reactions() {
        let (a, b) = (find(&mut parent, t), find(&mut parent, s));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

pub fn ensure_connected(net: &ReactionNetwork) -> Result<()> {
    match undirected_component_count(net) {
        1 => Ok(()),
        components => Err(CrnError::DisconnectedNetwork { components }),
    }
}

/// `rho_ij`: determinant of `A` without row `i` and column `j` (0-based).
pub fn minor(a: &ReactionMatrix, i: usize, j: usize) -> f64 {
    linalg::minor(a.n(), a.entries(), i, j)
}

pub fn diagonal_minors(a: &ReactionMatrix) -> Vec<f64> {
    (0..a.n()).map(|i| minor(a, i, i)).collect()
}

/// Threshold below which a diagonal minor counts as zero. Minors are
/// (N-1)-fold products of entries, so the threshold scales the same way.
pub fn minor_tolerance(a: &ReactionMatrix) -> f64 {
    let n = a.n();
    1e-9 * a.max_abs_diagonal().max(1.0).powi(n.saturating_sub(1) as i32)
}

/// Minor criterion: `A` is indecomposable iff every diagonal minor is
/// nonzero. Minors inside the band `(0.1 tau, 10 tau)` are reported as an
/// error instead of being classified.
pub fn is_indecomposable_algebraic(a: &ReactionMatrix) -> Result<bool> {
    indecomposable_from_minors(a, &diagonal_minors(a))
}

pub(crate) fn indecomposable_from_minors(a: &ReactionMatrix, minors: &[f64]) -> Result<bool> {
    let tau = minor_tolerance(a);
    for (index, &value) in minors.iter().enumerate() {
        let m = value.abs();
        if m > 0.1 * tau && m < 10.0 * tau {
            return Err(CrnError::IndeterminateMinor { index, value, tolerance: tau });
        }
    }
    if minors.iter().any(|m| m.abs() <= tau) {
        return Ok(false);
    }
    let expected = if (a.n() - 1) % 2 == 0 { 1.0 } else { -1.0 };
    for (index, &value) in minors.iter().enumerate() {
        if value.signum() != expected {
            return Err(CrnError::MinorSignViolation { index, value });
        }
    }
    Ok(true)
}

/// Detailed balance at `eq`: every reaction has its reverse and each
/// pair's fluxes cancel.
pub fn check_detailed_balance(a: &ReactionMatrix, eq: &[f64]) -> bool {
    let n = a.n();
    for i in 0..n {
        for j in i + 1..n {
            let (aij, aji) = (a.get(i, j), a.get(j, i));
            if aij == 0.0 && aji == 0.0 {
                continue;
            }
            if aij == 0.0 || aji == 0.0 {
                return false;
            }
            let forward = aji * eq[i];
            let backward = aij * eq[j];
            if (forward - backward).abs() > 1e-9 * (forward + backward) {
                return false;
            }
        }
    }
    true
}

/// Complex balance at `eq`: in-flow equals out-flow at every species.
pub fn check_complex_balance(a: &ReactionMatrix, eq: &[f64]) -> bool {
    let n = a.n();
    (0..n).all(|k| {
        let inflow: f64 = (0..n).filter(|&i| i != k).map(|i| a.get(k, i) * eq[i]).sum();
        let outflow = -a.get(k, k) * eq[k];
        let scale = inflow.abs() + outflow.abs();
        (inflow - outflow).abs() <= 1e-9 * scale
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GershgorinDisk {
    pub center: f64,
    pub radius: f64,
}

impl GershgorinDisk {
    pub fn contains(&self, z: Complex<f64>, slack: f64) -> bool {
        (z - Complex::new(self.center, 0.0)).norm() <= self.radius + slack
    }
}

/// Disk centred at `-a_hat` of radius `a_hat`, `a_hat = max |a_ii|`, which
/// contains the whole spectrum of a reaction matrix.
pub fn gershgorin_bound(a: &ReactionMatrix) -> GershgorinDisk {
    let a_hat = a.max_abs_diagonal();
    GershgorinDisk { center: -a_hat, radius: a_hat }
}

pub fn eigenvalues(a: &ReactionMatrix) -> Vec<Complex<f64>> {
    if a.n() == 0 {
        return Vec::new();
    }
    a.to_dmatrix().complex_eigenvalues().iter().copied().collect()
}

/// Largest distance by which a computed eigenvalue leaves the disk
/// (`<= 0` when all are inside).
pub fn gershgorin_excess(a: &ReactionMatrix) -> f64 {
    let disk = gershgorin_bound(a);
    eigenvalues(a)
        .into_iter()
        .map(|z| (z - Complex::new(disk.center, 0.0)).norm() - disk.radius)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Count of singular values above `1e-9 * sigma_max`.
pub fn numerical_rank(a: &ReactionMatrix) -> usize {
    if a.n() == 0 {
        return 0;
    }
    let sv = a.to_dmatrix().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * smax).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub weakly_reversible: bool,
    pub indecomposable_graph: bool,
    pub indecomposable_algebraic: bool,
    pub detailed_balanced: bool,
    pub complex_balanced: bool,
    pub minors_diag: Vec<f64>,
}

/// Balance classification. `equilibrium` is the positive equilibrium when
/// one exists (weakly reversible networks); both balance flags are false
/// otherwise.
pub fn balance_report(
    net: &ReactionNetwork,
    dec: &ComponentDecomposition,
    a: &ReactionMatrix,
    equilibrium: Option<&[f64]>,
) -> Result<BalanceReport> {
    let minors_diag = diagonal_minors(a);
    let indecomposable_algebraic = indecomposable_from_minors(a, &minors_diag)?;
    let weakly_reversible = is_weakly_reversible(dec, net);
    let (detailed_balanced, complex_balanced) = match equilibrium {
        Some(eq) => (check_detailed_balance(a, eq), check_complex_balance(a, eq)),
        None => (false, false),
    };
    Ok(BalanceReport {
        weakly_reversible,
        indecomposable_graph: dec.len() == 1,
        indecomposable_algebraic,
        detailed_balanced,
        complex_balanced,
        minors_diag,
    })
}

//! Quadratic relative entropy and its dissipation, the component-wise
//! entropy-like functionals used for networks that are not weakly
//! reversible, a constructive lower bound on the entropy decay rate, and
//! exponential-rate fitting on simulated traces.
//!
//! All spatial integrals use the same midpoint/face quadrature as the
//! finite-volume operator in [`crate::sim`], so that `dE/dt = -D` holds
//! exactly for the semi-discrete system.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::equilibria::EquilibriumState;
use crate::error::{CrnError, Result};
use crate::graph::{ComponentDecomposition, ComponentKind};
use crate::netparse::{ReactionMatrix, ReactionNetwork};
use crate::sim::{Grid, SimulationState, SolverConfig};

/// Floor (relative to the first value) below which samples are ignored
/// when fitting a decay rate.
pub const DEFAULT_FIT_FLOOR: f64 = 1e-12;
/// The fit window starts at this fraction of the last valid time.
pub const FIT_WINDOW_START: f64 = 0.2;
pub const MIN_FIT_SAMPLES: usize = 10;
/// The dissipation identity is only checked while `E > IDENTITY_FLOOR * E(0)`.
pub const IDENTITY_FLOOR: f64 = 1e-8;

/// Everything needed to evaluate entropy-like functionals for one
/// strongly connected component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReference {
    pub index: usize,
    pub kind: ComponentKind,
    pub species: Vec<usize>,
    /// Artificial unit-mass equilibrium for source/transmission
    /// components, injected-mass equilibrium for targets.
    pub equilibrium: EquilibriumState,
    #[serde(skip)]
    pub block: ReactionMatrix,
    /// Total rate out of the component per member species.
    pub outflow: Vec<f64>,
}

impl ComponentReference {
    pub fn new(a: &ReactionMatrix, dec: &ComponentDecomposition, index: usize, equilibrium: EquilibriumState) -> Self {
        let species = dec.components[index].clone();
        let outflow = species
            .iter()
            .map(|&k| (0..a.n()).filter(|l| !species.contains(l)).map(|l| a.get(l, k)).sum())
            .collect();
        Self { index, kind: dec.kinds[index], block: a.closed_block(&species), species, equilibrium, outflow }
    }
}

/// What the solution converges to, and the functionals measured against it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LongTimeReference {
    /// Weakly reversible network with its unique positive equilibrium.
    Equilibrium { equilibrium: EquilibriumState },
    /// One reference per component, in topological order.
    Components { components: Vec<ComponentReference> },
}

impl LongTimeReference {
    /// Long-time limit of every species: the equilibrium value, zero for
    /// source/transmission species.
    pub fn limit_values(&self, n_species: usize) -> Vec<f64> {
        match self {
            LongTimeReference::Equilibrium { equilibrium } => equilibrium.values().to_vec(),
            LongTimeReference::Components { components } => {
                let mut out = vec![0.0; n_species];
                for c in components.iter().filter(|c| c.kind == ComponentKind::Target) {
                    for (&s, &v) in c.species.iter().zip(c.equilibrium.values()) {
                        out[s] = v;
                    }
                }
                out
            }
        }
    }

    /// Total entropy-like functional and its dissipation at `state`, plus
    /// the per-component functionals.
    pub fn functionals(&self, state: &SimulationState, net: &ReactionNetwork) -> (f64, f64, Vec<f64>) {
        match self {
            LongTimeReference::Equilibrium { equilibrium } => {
                let e = relative_entropy(state, equilibrium.values());
                (e, entropy_dissipation(state, equilibrium.values(), net), vec![e])
            }
            LongTimeReference::Components { components } => {
                let pairs: Vec<(f64, f64)> = components.iter().map(|c| component_pair(state, c, net)).collect();
                (pairs.iter().map(|p| p.0).sum(), pairs.iter().map(|p| p.1).sum(), pairs.iter().map(|p| p.0).collect())
            }
        }
    }

    pub fn component_species(&self, n_species: usize) -> Vec<Vec<usize>> {
        match self {
            LongTimeReference::Equilibrium { .. } => vec![(0..n_species).collect()],
            LongTimeReference::Components { components } => components.iter().map(|c| c.species.clone()).collect(),
        }
    }
}

/// Shared kernel: for `v = u - shift` on `members`,
/// `2 sum d_k int |v_k'|^2 / w_k`
/// `+ sum_{k<l} (b_kl w_l + b_lk w_k) int (v_k/w_k - v_l/w_l)^2`
/// `+ 2 sum f_k int v_k^2 / w_k`
/// `- 2 sum_k int (v_k / w_k) z_k`, with `z_k` the in-flow from outside.
#[allow(clippy::too_many_arguments)]
fn quadratic_dissipation(
    state: &SimulationState,
    members: &[usize],
    shift: Option<&[f64]>,
    weights: &[f64],
    block: &ReactionMatrix,
    net: &ReactionNetwork,
    outflow: Option<&[f64]>,
    with_inflow: bool,
) -> f64 {
    let dx = state.grid.dx();
    let nc = state.grid.cells();
    let shifted = |k: usize| -> Vec<f64> {
        let s = members[k];
        let off = shift.map_or(0.0, |sh| sh[k]);
        state.fields[s].iter().map(|u| u - off).collect()
    };
    let v: Vec<Vec<f64>> = (0..members.len()).map(shifted).collect();

    let mut diffusion = 0.0;
    for (k, vk) in v.iter().enumerate() {
        let d = net.diffusions()[members[k]];
        if d == 0.0 {
            continue;
        }
        let faces: f64 = vk.windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum();
        diffusion += 2.0 * d * faces * dx / weights[k];
    }

    let mut reaction = 0.0;
    for k in 0..members.len() {
        for l in k + 1..members.len() {
            let c = block.get(k, l) * weights[l] + block.get(l, k) * weights[k];
            if c == 0.0 {
                continue;
            }
            let sq: f64 = (0..nc).map(|x| (v[k][x] / weights[k] - v[l][x] / weights[l]).powi(2)).sum();
            reaction += c * sq * dx;
        }
    }

    let mut out = 0.0;
    if let Some(f) = outflow {
        for (k, vk) in v.iter().enumerate() {
            if f[k] != 0.0 {
                out += 2.0 * f[k] * vk.iter().map(|x| x * x).sum::<f64>() * dx / weights[k];
            }
        }
    }

    let mut inflow = 0.0;
    if with_inflow {
        let n = net.n_species();
        for (k, vk) in v.iter().enumerate() {
            let target = members[k];
            for l in (0..n).filter(|l| !members.contains(l)) {
                let a = net.rate(target, l);
                if a == 0.0 {
                    continue;
                }
                let cross: f64 = vk.iter().zip(&state.fields[l]).map(|(vx, ux)| vx * ux).sum();
                inflow += 2.0 * a * cross * dx / weights[k];
            }
        }
    }
    diffusion + reaction + out - inflow
}

fn weighted_square(state: &SimulationState, members: &[usize], shift: Option<&[f64]>, weights: &[f64]) -> f64 {
    let dx = state.grid.dx();
    members
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let off = shift.map_or(0.0, |sh| sh[k]);
            state.fields[s].iter().map(|u| (u - off).powi(2)).sum::<f64>() * dx / weights[k]
        })
        .sum()
}

/// `sum_i int (u_i - u_i,inf)^2 / u_i,inf`.
pub fn relative_entropy(state: &SimulationState, eq: &[f64]) -> f64 {
    let all: Vec<usize> = (0..state.n_species()).collect();
    weighted_square(state, &all, Some(eq), eq)
}

/// Explicit dissipation `-dE/dt` of [`relative_entropy`]: a diffusion part
/// over the `n - 1` interior faces plus the pairwise reaction part.
pub fn entropy_dissipation(state: &SimulationState, eq: &[f64], net: &ReactionNetwork) -> f64 {
    let all: Vec<usize> = (0..state.n_species()).collect();
    let a = ReactionMatrix::from_network(net);
    quadratic_dissipation(state, &all, Some(eq), eq, &a, net, None, false)
}

fn require_transient(comp: &ComponentReference) -> Result<()> {
    match comp.kind {
        ComponentKind::Target => Err(CrnError::WrongComponentKind { kind: "target" }),
        _ => Ok(()),
    }
}

fn require_target(comp: &ComponentReference) -> Result<()> {
    match comp.kind {
        ComponentKind::Target => Ok(()),
        other => Err(CrnError::WrongComponentKind { kind: other.as_str() }),
    }
}

/// `sum_k int v_k^2 / v_k,inf` over a source or transmission component,
/// raw concentrations against the artificial equilibrium.
pub fn component_entropy(state: &SimulationState, comp: &ComponentReference) -> Result<f64> {
    require_transient(comp)?;
    Ok(weighted_square(state, &comp.species, None, comp.equilibrium.values()))
}

/// `-d/dt` of [`component_entropy`]: diffusion, within-component reactions,
/// out-flow, and (for transmission components) the signed in-flow term.
pub fn component_dissipation(state: &SimulationState, comp: &ComponentReference, net: &ReactionNetwork) -> Result<f64> {
    require_transient(comp)?;
    Ok(quadratic_dissipation(
        state,
        &comp.species,
        None,
        comp.equilibrium.values(),
        &comp.block,
        net,
        Some(&comp.outflow),
        comp.kind == ComponentKind::Transmission,
    ))
}

/// Relative entropy of a target component against its injected-mass
/// equilibrium.
pub fn target_entropy(state: &SimulationState, comp: &ComponentReference) -> Result<f64> {
    require_target(comp)?;
    let eq = comp.equilibrium.values();
    Ok(weighted_square(state, &comp.species, Some(eq), eq))
}

/// `-d/dt` of [`target_entropy`], including the in-flow cross term.
pub fn target_dissipation(state: &SimulationState, comp: &ComponentReference, net: &ReactionNetwork) -> Result<f64> {
    require_target(comp)?;
    let eq = comp.equilibrium.values();
    Ok(quadratic_dissipation(state, &comp.species, Some(eq), eq, &comp.block, net, None, true))
}

fn component_pair(state: &SimulationState, comp: &ComponentReference, net: &ReactionNetwork) -> (f64, f64) {
    let r = match comp.kind {
        ComponentKind::Target => target_entropy(state, comp).and_then(|e| Ok((e, target_dissipation(state, comp, net)?))),
        _ => component_entropy(state, comp).and_then(|e| Ok((e, component_dissipation(state, comp, net)?))),
    };
    r.expect("kind checked by match")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    /// Total entropy-like functional (sum over components when the
    /// reference is component-wise).
    pub entropy: f64,
    pub dissipation: f64,
    pub mass: f64,
    /// `||u_i - u_i,limit||_L2` per species.
    pub l2_dist: Vec<f64>,
    pub component_mass: Vec<f64>,
    pub component_entropy: Vec<f64>,
}

impl TraceSample {
    pub fn measure(state: &SimulationState, net: &ReactionNetwork, reference: &LongTimeReference) -> Self {
        let ns = state.n_species();
        let limit = reference.limit_values(ns);
        let dx = state.grid.dx();
        let l2_dist = state
            .fields
            .iter()
            .zip(&limit)
            .map(|(f, &l)| (f.iter().map(|u| (u - l).powi(2)).sum::<f64>() * dx).sqrt())
            .collect();
        let averages = state.averages();
        let component_mass = reference
            .component_species(ns)
            .iter()
            .map(|members| members.iter().map(|&s| averages[s]).sum())
            .collect();
        let (entropy, dissipation, component_entropy) = reference.functionals(state, net);
        Self { t: state.t, entropy, dissipation, mass: averages.iter().sum(), l2_dist, component_mass, component_entropy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub network_hash: String,
    pub config: SolverConfig,
    pub grid_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub samples: Vec<TraceSample>,
    pub metadata: TraceMetadata,
}

impl EntropyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.entropy).collect()
    }

    /// CSV with columns `t,E,D,mass,l2_dist_<species>...,mass_c<k>...`.
    pub fn to_csv(&self, species: &[String]) -> String {
        let mut out = String::from("t,E,D,mass");
        for s in species {
            write!(out, ",l2_dist_{s}").expect("write to String");
        }
        let n_comp = self.samples.first().map_or(0, |s| s.component_mass.len());
        for c in 0..n_comp {
            write!(out, ",mass_c{c}").expect("write to String");
        }
        out.push('\n');
        for s in &self.samples {
            write!(out, "{},{},{},{}", s.t, s.entropy, s.dissipation, s.mass).expect("write to String");
            for v in s.l2_dist.iter().chain(&s.component_mass) {
                write!(out, ",{v}").expect("write to String");
            }
            out.push('\n');
        }
        out
    }
}

/// Largest increase between consecutive values, relative to the first.
pub fn monotonicity_excess(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else { return 0.0 };
    let worst = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    if first > 0.0 {
        worst / first
    } else {
        worst
    }
}

/// Worst relative mismatch `|dE/dt + D| / D` with `dE/dt` from central
/// differences of the samples, over interior samples where
/// `E > threshold * E(0)`. Sampling strides much longer than the fastest
/// decay time make this coarse; [`crate::sim::SimulationRun`] carries the
/// same measure at step resolution.
pub fn dissipation_identity_error(trace: &EntropyTrace, threshold: f64) -> f64 {
    let s = &trace.samples;
    let Some(first) = s.first() else { return 0.0 };
    let e0 = first.entropy;
    let mut worst: f64 = 0.0;
    for w in s.windows(3) {
        if !(w[1].entropy > threshold * e0) || w[1].dissipation <= 0.0 {
            continue;
        }
        let dedt = (w[2].entropy - w[0].entropy) / (w[2].t - w[0].t);
        worst = worst.max((dedt + w[1].dissipation).abs() / w[1].dissipation);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda_fit: f64,
    pub lambda_lower_bound: Option<f64>,
    pub fit_window: (f64, f64),
    /// Max deviation of `ln value` from the fitted line within the window.
    pub fit_residual: f64,
    pub samples_used: usize,
}

/// Least-squares fit of `ln value = c - lambda t` over
/// `[0.2 t_last, t_last]`, where `t_last` is the end of the leading run
/// of samples with `value > floor * value(0)`.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], floor: f64) -> Result<DecayReport> {
    if times.len() != values.len() {
        return Err(CrnError::Dimension("times and values differ in length".into()));
    }
    let Some(&v0) = values.first() else {
        return Err(CrnError::InsufficientSamples { needed: MIN_FIT_SAMPLES, found: 0 });
    };
    if !(v0 > 0.0) || !values.iter().any(|&v| v < 0.5 * v0) {
        return Err(CrnError::InsufficientDecay);
    }
    let valid = values.iter().take_while(|&&v| v > floor * v0).count();
    if valid < MIN_FIT_SAMPLES {
        return Err(CrnError::InsufficientSamples { needed: MIN_FIT_SAMPLES, found: valid });
    }
    let t_last = times[valid - 1];
    let t_start = FIT_WINDOW_START * t_last;
    let pts: Vec<(f64, f64)> =
        times[..valid].iter().zip(&values[..valid]).filter(|(&t, _)| t >= t_start).map(|(&t, &v)| (t, v.ln())).collect();
    if pts.len() < 3 {
        return Err(CrnError::InsufficientSamples { needed: 3, found: pts.len() });
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let fit_residual = pts.iter().map(|(t, y)| (y - intercept - slope * t).abs()).fold(0.0, f64::max);
    Ok(DecayReport {
        lambda_fit: -slope,
        lambda_lower_bound: None,
        fit_window: (pts[0].0, t_last),
        fit_residual,
        samples_used: pts.len(),
    })
}

/// Decay rate of the trace's total entropy.
pub fn fit_decay_rate(trace: &EntropyTrace, floor: f64) -> Result<DecayReport> {
    fit_exponential_decay(&trace.times(), &trace.entropies(), floor)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EedCheck {
    pub passed: bool,
    pub first_violation: Option<usize>,
    /// `min_s (D - lambda E) / E(0)`.
    pub worst_margin: f64,
}

/// `D >= lambda E - 1e-9 E(0)` at every sample.
pub fn verify_eed(trace: &EntropyTrace, lambda: f64) -> EedCheck {
    let e0 = trace.samples.first().map_or(0.0, |s| s.entropy);
    let slack = 1e-9 * e0;
    let mut first_violation = None;
    let mut worst_margin = f64::INFINITY;
    for (i, s) in trace.samples.iter().enumerate() {
        let margin = s.dissipation - lambda * s.entropy;
        if margin < -slack && first_violation.is_none() {
            first_violation = Some(i);
        }
        let scaled = if e0 > 0.0 { margin / e0 } else { margin };
        worst_margin = worst_margin.min(scaled);
    }
    EedCheck { passed: first_violation.is_none(), first_violation, worst_margin }
}

/// Constructive entropy/entropy-dissipation constant and its pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EedBound {
    pub lambda: f64,
    pub lambda_diff: f64,
    /// `None` for a single species (no reaction part is needed).
    pub lambda_react: Option<f64>,
    pub poincare_constant: f64,
    pub xi: Option<f64>,
    pub zero_mass_factor: Option<f64>,
    /// Pairs with no direct reaction, completed through a path.
    pub completed_pairs: usize,
}

/// Fewest-edge path from `from` to `to` in the undirected graph of
/// positive pair coefficients; returns `(edges, min coefficient)`.
fn shortest_path(coef: &[Vec<f64>], from: usize, to: usize) -> Option<(usize, f64)> {
    let n = coef.len();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for w in 0..n {
            if !seen[w] && coef[v][w] > 0.0 {
                seen[w] = true;
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let (mut edges, mut sigma, mut v) = (0, f64::INFINITY, to);
    while v != from {
        let p = prev[v];
        sigma = sigma.min(coef[p][v]);
        edges += 1;
        v = p;
    }
    Some((edges, sigma))
}

/// Lower bound `lambda` with `D(W|X_inf) >= lambda E(W|X_inf)` for all
/// zero-mass perturbations `W` on `grid`, assembled as
/// `min(lambda_diff, lambda_react)`:
///
/// * `lambda_diff = 2 C_P min_i d_i` bounds the part of `E` orthogonal to
///   spatial constants, `C_P` the discrete Poincare constant of `grid`.
/// * `lambda_react = xi * min_i u_i / max_{i<j} u_i u_j` bounds the part
///   carried by the spatial averages.
pub fn eed_lambda_lower_bound(net: &ReactionNetwork, eq: &[f64], grid: &Grid) -> Result<EedBound> {
    let n = net.n_species();
    if eq.len() != n {
        return Err(CrnError::Dimension(format!("{} equilibrium values for {n} species", eq.len())));
    }
    if let Some(species) = net.diffusions().iter().position(|&d| d == 0.0) {
        return Err(CrnError::DegenerateDiffusion { species });
    }
    let poincare_constant = grid.poincare_constant();
    let d_min = net.diffusions().iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_diff = 2.0 * poincare_constant * d_min;

    if n == 1 {
        // zero mass forces a zero average, nothing left for reactions
        return Ok(EedBound {
            lambda: lambda_diff,
            lambda_diff,
            lambda_react: None,
            poincare_constant,
            xi: None,
            zero_mass_factor: None,
            completed_pairs: 0,
        });
    }

    // c_ij = a_ij u_j + a_ji u_i; Jensen moves the reaction part onto the
    // averages: D_react >= sum_{i<j} c_ij (wbar_i/u_i - wbar_j/u_j)^2.
    let mut coef = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = net.rate(i, j) * eq[j] + net.rate(j, i) * eq[i];
            coef[i][j] = c;
            coef[j][i] = c;
        }
    }
    let direct_min = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| coef[i][j])
        .filter(|&c| c > 0.0)
        .fold(f64::INFINITY, f64::min);

    // A missing pair (i, j) is reached along a path of r - 1 edges whose
    // smallest coefficient is sigma; Cauchy-Schwarz along the path gives
    // sum_path c_e y_e^2 >= sigma / (r - 1) * y_ij^2.
    let mut path_terms = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if coef[i][j] == 0.0 {
                let (edges, sigma) = shortest_path(&coef, i, j).ok_or(CrnError::NotWeaklyReversible)?;
                path_terms.push(sigma / edges as f64);
            }
        }
    }
    let completed_pairs = path_terms.len();
    // Half of the reaction sum is kept for the direct pairs; the other half
    // is shared equally by the K completed pairs, each of which may reuse
    // any edge, hence the division by K.
    let xi = if completed_pairs == 0 {
        direct_min
    } else {
        let k = completed_pairs as f64;
        let path_min = path_terms.iter().map(|t| t / k).fold(f64::INFINITY, f64::min);
        0.5 * direct_min.min(path_min)
    };

    // Zero total mass: sum_{i<j} y_ij^2 >= (1/P) sum u_i u_j y_ij^2 with
    // P = max u_i u_j, then >= -(2/P) sum wbar_i wbar_j = (1/P) sum wbar_i^2
    // >= (min u / P) sum wbar_i^2 / u_i.
    let u_min = eq.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| eq[i] * eq[j])
        .fold(0.0, f64::max);
    let zero_mass_factor = u_min / p_max;
    let lambda_react = xi * zero_mass_factor;

    Ok(EedBound {
        lambda: lambda_diff.min(lambda_react),
        lambda_diff,
        lambda_react: Some(lambda_react),
        poincare_constant,
        xi: Some(xi),
        zero_mass_factor: Some(zero_mass_factor),
        completed_pairs,
    })
}

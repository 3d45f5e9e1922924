//! End-to-end verification: analyze, simulate, and check the simulated
//! trajectory against the structural predictions.

use serde::Serialize;

use crate::analysis::{analyze_on_grid, Analysis, EQUILIBRIUM_AGREEMENT};
use crate::entropy::{
    eed_lambda_lower_bound, fit_decay_rate, fit_exponential_decay, monotonicity_excess,
    verify_eed, DecayReport, EedBound, EntropyTrace, LongTimeReference, DEFAULT_FIT_FLOOR,
};
use crate::error::Result;
use crate::graph::ComponentKind;
use crate::netparse::ReactionNetwork;
use crate::sim::{resolve_grid, simulate, SimulationRun, SolverConfig, TimeScheme};

pub const MASS_TOL: f64 = 1e-10;
pub const NONNEGATIVITY_TOL: f64 = 1e-12;
pub const GERSHGORIN_SLACK: f64 = 1e-8;
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;
pub const MONOTONICITY_SLACK: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 0.05;
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const BOUND_FIT_FACTOR: f64 = 1.05;
pub const TRANSIENT_L2_TOL: f64 = 1e-6;
pub const TARGET_STATE_TOL: f64 = 1e-5;
pub const QUADRATURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity.
    pub value: f64,
    /// Threshold it was compared against.
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold, detail: None }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold, detail: None }
    }

    fn positive(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), passed: value > 0.0, value, threshold: 0.0, detail: None }
    }

    fn failed(name: impl Into<String>, detail: String) -> Self {
        Self { name: name.into(), passed: false, value: f64::NAN, threshold: f64::NAN, detail: Some(detail) }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub max_mass_drift: f64,
    pub min_value: f64,
    pub gershgorin_excess: f64,
    pub equilibrium_residual: Option<f64>,
    pub equilibrium_agreement: Option<f64>,
    pub dissipation_identity: Option<f64>,
    pub monotonicity_excess: Option<f64>,
    pub injected_mass_quadrature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub network_hash: String,
    pub weakly_reversible: bool,
    pub all_diffusive: bool,
    pub config: SolverConfig,
    pub grid_cells: usize,
    pub steps: usize,
    pub lambda_lb: Option<f64>,
    pub lambda_fit: Option<f64>,
    pub eed_bound: Option<EedBound>,
    pub fit: Option<DecayReport>,
    pub residuals: Residuals,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Everything produced by a verification run.
#[derive(Debug, Clone)]
pub struct Verification {
    pub analysis: Analysis,
    pub run: SimulationRun,
    pub verdict: Verdict,
}

fn fit_series(name: String, times: &[f64], values: &[f64]) -> Check {
    match fit_exponential_decay(times, values, DEFAULT_FIT_FLOOR) {
        Ok(r) => Check::positive(name, r.lambda_fit),
        Err(e) => Check::failed(name, e.to_string()),
    }
}

fn component_series(trace: &EntropyTrace, index: usize) -> Vec<f64> {
    trace.samples.iter().map(|s| s.component_entropy[index]).collect()
}

/// Runs the analysis and a simulation with `config`, then every check that
/// applies to the network's structure.
pub fn verify(net: &ReactionNetwork, config: &SolverConfig) -> Result<Verification> {
    config.validate()?;
    let grid = resolve_grid(net, config)?;
    let analysis = analyze_on_grid(net, grid)?;
    let run = simulate(net, config, &analysis.reference)?;
    let trace = &run.trace;
    let all_diffusive = net.diffusions().iter().all(|&d| d > 0.0);
    let mut checks = Vec::new();

    checks.push(Check::at_most("mass_conservation", run.max_mass_drift, MASS_TOL));
    let init_scale =
        net.initial_profiles().iter().map(|p| p.mean().abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if config.scheme == TimeScheme::BackwardEuler {
        checks.push(Check::at_least("nonnegativity", run.min_value / init_scale, -NONNEGATIVITY_TOL));
    }
    checks.push(Check::at_most("gershgorin", analysis.gershgorin_excess, GERSHGORIN_SLACK));

    let mut residuals = Residuals {
        max_mass_drift: run.max_mass_drift,
        min_value: run.min_value,
        gershgorin_excess: analysis.gershgorin_excess,
        equilibrium_residual: None,
        equilibrium_agreement: analysis.equilibrium_agreement,
        dissipation_identity: None,
        monotonicity_excess: None,
        injected_mass_quadrature: None,
    };

    let fit = fit_decay_rate(trace, DEFAULT_FIT_FLOOR);
    let mut eed_bound = None;
    let times = trace.times();

    match &analysis.reference {
        LongTimeReference::Equilibrium { equilibrium } => {
            residuals.equilibrium_residual = Some(equilibrium.residual());
            checks.push(Check::at_most("equilibrium_residual", equilibrium.residual(), EQUILIBRIUM_RESIDUAL_TOL));
            if let Some(gap) = analysis.equilibrium_agreement {
                checks.push(Check::at_most("equilibrium_agreement", gap, EQUILIBRIUM_AGREEMENT));
            }
            let entropies = trace.entropies();
            let mono = monotonicity_excess(&entropies);
            residuals.monotonicity_excess = Some(mono);
            checks.push(Check::at_most("entropy_monotone", mono, MONOTONICITY_SLACK));
            let identity = run.dissipation_identity;
            residuals.dissipation_identity = Some(identity);
            checks.push(Check::at_most("dissipation_identity", identity, IDENTITY_TOL));

            let e0 = entropies[0];
            let e_last = *entropies.last().expect("trace has the initial sample");
            let ratio = if e0 > 0.0 { e_last / e0 } else { 0.0 };
            checks.push(Check::at_most("convergence", ratio, CONVERGENCE_TOL));
            checks.push(match &fit {
                Ok(r) => Check::positive("decay_rate_positive", r.lambda_fit),
                Err(e) => Check::failed("decay_rate_positive", e.to_string()),
            });

            if all_diffusive {
                let bound = eed_lambda_lower_bound(net, equilibrium.values(), &grid)?;
                let eed = verify_eed(trace, bound.lambda);
                let mut c = Check::at_least("eed_inequality", eed.worst_margin, -MONOTONICITY_SLACK);
                c.passed = eed.passed;
                if let Some(i) = eed.first_violation {
                    c = c.with_detail(format!("first violation at sample {i} (t = {})", trace.samples[i].t));
                }
                checks.push(c);
                checks.push(match &fit {
                    Ok(r) => Check::at_most("bound_below_fit", bound.lambda, BOUND_FIT_FACTOR * r.lambda_fit),
                    Err(e) => Check::failed("bound_below_fit", e.to_string()),
                });
                eed_bound = Some(bound);
            }
        }
        LongTimeReference::Components { components } => {
            let last = run.final_state.fields.as_slice();
            let dx = run.final_state.grid.dx();
            for (k, c) in components.iter().enumerate() {
                match c.kind {
                    ComponentKind::Target => {
                        let eq = c.equilibrium.values();
                        let gap = c
                            .species
                            .iter()
                            .zip(eq)
                            .flat_map(|(&s, &v)| last[s].iter().map(move |u| (u - v).abs()))
                            .fold(0.0, f64::max);
                        checks.push(Check::at_most(format!("target_state_c{k}"), gap, TARGET_STATE_TOL));
                        let dist: Vec<f64> = trace
                            .samples
                            .iter()
                            .map(|s| c.species.iter().map(|&i| s.l2_dist[i].powi(2)).sum())
                            .collect();
                        checks.push(fit_series(format!("target_rate_c{k}"), &times, &dist));
                    }
                    _ => {
                        let l2 = c
                            .species
                            .iter()
                            .map(|&s| (last[s].iter().map(|u| u * u).sum::<f64>() * dx).sqrt())
                            .fold(0.0, f64::max);
                        checks.push(Check::at_most(format!("transient_l2_c{k}"), l2, TRANSIENT_L2_TOL));
                        checks.push(fit_series(format!("transient_rate_c{k}"), &times, &component_series(trace, k)));
                    }
                }
            }
            let inj = analysis.injected.as_ref().expect("computed for component references");
            let quad = run.integrals.consistent_with(config.scheme);
            let dec = &analysis.decomposition;
            let mut gap: f64 = 0.0;
            for l in dec.non_target_species() {
                gap = gap.max((quad[l] - inj.integrals[l]).abs());
            }
            let a = &analysis.matrix;
            for (t, members) in dec.components.iter().enumerate().filter(|(t, _)| dec.kinds[*t] == ComponentKind::Target)
            {
                let from_quad: f64 = members
                    .iter()
                    .map(|&k| (0..a.n()).filter(|l| !members.contains(l)).map(|l| a.get(k, l) * quad[l]).sum::<f64>())
                    .sum();
                gap = gap.max((from_quad - inj.per_component[t]).abs());
            }
            residuals.injected_mass_quadrature = Some(gap);
            checks.push(Check::at_most("injected_mass_quadrature", gap, QUADRATURE_TOL));
            checks.push(match &fit {
                Ok(r) => Check::positive("decay_rate_positive", r.lambda_fit),
                Err(e) => Check::failed("decay_rate_positive", e.to_string()),
            });
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    let fit = fit.ok();
    let verdict = Verdict {
        network_hash: net.content_hash(),
        weakly_reversible: analysis.weakly_reversible(),
        all_diffusive,
        config: *config,
        grid_cells: grid.cells(),
        steps: run.steps,
        lambda_lb: eed_bound.as_ref().map(|b| b.lambda),
        lambda_fit: fit.as_ref().map(|f| f.lambda_fit),
        eed_bound,
        fit,
        residuals,
        checks,
        passed,
    };
    Ok(Verification { analysis, run, verdict })
}

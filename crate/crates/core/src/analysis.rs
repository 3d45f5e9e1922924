//! One-shot structural and equilibrium analysis of a network, and the
//! serializable report built from it.

use serde::Serialize;

use crate::entropy::{ComponentReference, LongTimeReference};
use crate::equilibria::{
    artificial_equilibrium, equilibrium_cramer, equilibrium_nullspace, injected_mass, target_equilibrium,
    EquilibriumKind, EquilibriumState, InjectedMass,
};
use crate::error::Result;
use crate::graph::{
    balance_report, ensure_connected, gershgorin_bound, gershgorin_excess, numerical_rank,
    strongly_connected_components, BalanceReport, ComponentDecomposition, ComponentKind, GershgorinDisk,
};
use crate::netparse::{ReactionMatrix, ReactionNetwork};
use crate::sim::{Grid, SimulationState};

/// Agreement required between the minor formula and the null-space solve.
pub const EQUILIBRIUM_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub matrix: ReactionMatrix,
    pub decomposition: ComponentDecomposition,
    pub balance: BalanceReport,
    pub grid: Grid,
    /// Discrete spatial averages of the initial data on `grid`.
    pub initial_averages: Vec<f64>,
    pub reference: LongTimeReference,
    /// Present for networks that are not weakly reversible.
    pub injected: Option<InjectedMass>,
    /// Max relative gap between the two equilibrium routes (weakly
    /// reversible networks only).
    pub equilibrium_agreement: Option<f64>,
    pub gershgorin: GershgorinDisk,
    pub gershgorin_excess: f64,
    pub rank: usize,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn weakly_reversible(&self) -> bool {
        self.balance.weakly_reversible
    }

    /// The positive equilibrium of a weakly reversible network.
    pub fn equilibrium(&self) -> Option<&EquilibriumState> {
        match &self.reference {
            LongTimeReference::Equilibrium { equilibrium } => Some(equilibrium),
            LongTimeReference::Components { .. } => None,
        }
    }

    pub fn report(&self, net: &ReactionNetwork) -> AnalysisReport {
        let dec = &self.decomposition;
        let names = |members: &[usize]| members.iter().map(|&s| net.species()[s].clone()).collect();
        let components = match &self.reference {
            LongTimeReference::Equilibrium { equilibrium } => vec![ComponentReport {
                index: 0,
                kind: dec.kinds[0],
                species: names(&dec.components[0]),
                equilibrium: EquilibriumReport::from_state(equilibrium),
                injected_mass: None,
            }],
            LongTimeReference::Components { components } => components
                .iter()
                .map(|c| ComponentReport {
                    index: c.index,
                    kind: c.kind,
                    species: names(&c.species),
                    equilibrium: EquilibriumReport::from_state(&c.equilibrium),
                    injected_mass: self
                        .injected
                        .as_ref()
                        .filter(|_| c.kind == ComponentKind::Target)
                        .map(|inj| inj.per_component[c.index]),
                })
                .collect(),
        };
        AnalysisReport {
            network_hash: net.content_hash(),
            species: net.species().to_vec(),
            grid_cells: self.grid.cells(),
            components,
            topological_order: (0..dec.len()).collect(),
            condensation_edges: dec.condensation_edges.iter().copied().collect(),
            balance: self.balance.clone(),
            gershgorin: self.gershgorin,
            gershgorin_excess: self.gershgorin_excess,
            rank: self.rank,
            equilibrium_agreement: self.equilibrium_agreement,
            condition_estimate: self.injected.as_ref().map(|i| i.condition),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub values: Vec<f64>,
    pub mass: f64,
    pub residual: f64,
}

impl EquilibriumReport {
    fn from_state(eq: &EquilibriumState) -> Self {
        Self { kind: eq.kind(), values: eq.values().to_vec(), mass: eq.mass(), residual: eq.residual() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub index: usize,
    pub kind: ComponentKind,
    pub species: Vec<String>,
    pub equilibrium: EquilibriumReport,
    pub injected_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub network_hash: String,
    pub species: Vec<String>,
    pub grid_cells: usize,
    /// Listed in topological order of the condensation graph.
    pub components: Vec<ComponentReport>,
    pub topological_order: Vec<usize>,
    pub condensation_edges: Vec<(usize, usize)>,
    pub balance: BalanceReport,
    pub gershgorin: GershgorinDisk,
    pub gershgorin_excess: f64,
    pub rank: usize,
    pub equilibrium_agreement: Option<f64>,
    /// Condition estimate of the non-target submatrix.
    pub condition_estimate: Option<f64>,
    pub warnings: Vec<String>,
}

fn relative_gap(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs() / a.abs().max(b.abs())).fold(0.0, f64::max)
}

/// Analysis with the network's own grid.
pub fn analyze(net: &ReactionNetwork) -> Result<Analysis> {
    analyze_on_grid(net, Grid::new(net.grid_cells())?)
}

/// Analysis whose initial averages (and everything derived from them) are
/// taken on `grid`, so that they match a simulation on that grid.
pub fn analyze_on_grid(net: &ReactionNetwork, grid: Grid) -> Result<Analysis> {
    ensure_connected(net)?;
    let a = ReactionMatrix::from_network(net);
    let dec = strongly_connected_components(net);
    let initial_averages = SimulationState::initial(net, grid).averages();
    let mass: f64 = initial_averages.iter().sum();
    let mut warnings = Vec::new();

    let weakly_reversible = crate::graph::is_weakly_reversible(&dec, net);
    let (reference, injected, equilibrium_agreement, eq_values) = if weakly_reversible {
        let eq = equilibrium_cramer(&a, mass)?;
        let oracle = equilibrium_nullspace(&a, mass)?;
        let gap = relative_gap(eq.values(), oracle.values());
        if gap > EQUILIBRIUM_AGREEMENT {
            warnings.push(format!("minor and null-space equilibria differ by {gap:e} relative"));
        }
        let values = eq.values().to_vec();
        (LongTimeReference::Equilibrium { equilibrium: eq }, None, Some(gap), Some(values))
    } else {
        let inj = injected_mass(&a, &dec, &initial_averages)?;
        if inj.ill_conditioned() {
            warnings.push(format!("non-target submatrix condition estimate {:e}", inj.condition));
        }
        let mut components = Vec::with_capacity(dec.len());
        for (index, members) in dec.components.iter().enumerate() {
            let eq = match dec.kinds[index] {
                ComponentKind::Target => target_equilibrium(&a, &dec, index, &initial_averages, &inj)?,
                _ => artificial_equilibrium(&a, members)?,
            };
            components.push(ComponentReference::new(&a, &dec, index, eq));
        }
        (LongTimeReference::Components { components }, Some(inj), None, None)
    };

    let balance = balance_report(net, &dec, &a, eq_values.as_deref())?;
    Ok(Analysis {
        gershgorin: gershgorin_bound(&a),
        gershgorin_excess: gershgorin_excess(&a),
        rank: numerical_rank(&a),
        matrix: a,
        decomposition: dec,
        balance,
        grid,
        initial_averages,
        reference,
        injected,
        equilibrium_agreement,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CrnError;
    use crate::netparse::parse_network;

    #[test]
    fn two_species_analysis() {
        let net = parse_network(
            "species A B\ndiff A 1\ndiff B 1\nrxn A -> B 1\nrxn B -> A 2\ninit A const 1\ninit B const 2",
        )
        .unwrap();
        let an = analyze(&net).unwrap();
        let eq = an.equilibrium().unwrap().values();
        assert!((eq[0] - 2.0).abs() < 1e-14 && (eq[1] - 1.0).abs() < 1e-14);
        assert!(an.balance.detailed_balanced && an.balance.complex_balanced);
        assert_eq!(an.rank, 1);
        assert!(an.equilibrium_agreement.unwrap() < 1e-12);
        let report = an.report(&net);
        assert_eq!(report.components.len(), 1);
        assert_eq!(report.components[0].equilibrium.kind, EquilibriumKind::TrueEquilibrium);
    }

    #[test]
    fn figure3_analysis() {
        let net = parse_network(
            "species S1 S2 S3 S4 S5 S6\nrxn S1 -> S2 1\nrxn S2 -> S1 1\nrxn S2 -> S3 1\nrxn S1 -> S3 1\nrxn S1 -> S4 1\nrxn S4 -> S5 1\nrxn S5 -> S4 1\nrxn S3 -> S6 1\nrxn S3 -> S4 1\ninit S1 const 1\ninit S2 const 1\ninit S3 const 1\ninit S4 const 1\ninit S5 const 1\ninit S6 const 1",
        )
        .unwrap();
        let an = analyze(&net).unwrap();
        assert!(!an.weakly_reversible());
        let report = an.report(&net);
        let kinds: Vec<_> = report.components.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![ComponentKind::Source, ComponentKind::Transmission, ComponentKind::Target, ComponentKind::Target]
        );
        let masses: Vec<f64> = report.components.iter().map(|c| c.equilibrium.mass).collect();
        assert!((masses.iter().skip(2).sum::<f64>() - 6.0).abs() < 1e-12);
        assert_eq!(masses[0], 1.0);
        assert!(!an.balance.detailed_balanced);
    }

    #[test]
    fn disconnected_is_rejected() {
        let net = parse_network("species A B C D\nrxn A -> B 1\nrxn B -> A 1\nrxn C -> D 1\nrxn D -> C 1\ninit A const 1").unwrap();
        assert_eq!(analyze(&net).unwrap_err(), CrnError::DisconnectedNetwork { components: 2 });
    }

    #[test]
    fn single_species_is_its_own_target() {
        let net = parse_network("species A\ndiff A 1\ninit A bump 1 0.5 1").unwrap();
        let an = analyze(&net).unwrap();
        assert!(an.weakly_reversible());
        assert_eq!(an.decomposition.kinds, vec![ComponentKind::Target]);
        assert!((an.equilibrium().unwrap().values()[0] - 1.0).abs() < 1e-14);
    }
}

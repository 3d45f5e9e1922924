//! Equilibria: the positive equilibrium of a weakly reversible network
//! (Cramer/minor formula and an independent null-space solve), unit-mass
//! artificial equilibria of single components, and target-component
//! equilibria fed by the mass that drains out of upstream components.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CrnError, Result};
use crate::graph::{self, ComponentDecomposition, ComponentKind};
use crate::linalg;
use crate::netparse::ReactionMatrix;

/// Condition estimate above which the non-target solve is flagged.
pub const CONDITION_WARNING: f64 = 1e12;
/// Condition estimate treated as numerically singular.
pub const CONDITION_SINGULAR: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    TrueEquilibrium,
    ArtificialUnitMass,
    TargetWithInjection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumState {
    values: Vec<f64>,
    mass: f64,
    kind: EquilibriumKind,
    /// `|A x|_inf / (|A|_inf |x|_inf)` for the block it balances.
    residual: f64,
}

impl EquilibriumState {
    fn new(values: Vec<f64>, mass: f64, kind: EquilibriumKind, a: &ReactionMatrix) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(CrnError::NonPositiveEquilibrium { index, value });
        }
        let ax = a.mul_vec(&values);
        let xmax = values.iter().copied().fold(0.0, f64::max);
        let scale = a.norm_inf() * xmax;
        let residual = if scale == 0.0 { 0.0 } else { ax.iter().map(|v| v.abs()).fold(0.0, f64::max) / scale };
        Ok(Self { values, mass, kind, residual })
    }

    /// Equilibrium with the given values; used for networks whose
    /// equilibrium is known in closed form (and in tests).
    pub fn from_values(values: Vec<f64>, kind: EquilibriumKind, a: &ReactionMatrix) -> Result<Self> {
        let mass = values.iter().sum();
        Self::new(values, mass, kind, a)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn kind(&self) -> EquilibriumKind {
        self.kind
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass.is_finite() && mass > 0.0 {
        Ok(())
    } else {
        Err(CrnError::InvalidMass(mass))
    }
}

/// `u_j = M rho_jj / sum_i rho_ii`.
pub fn equilibrium_cramer(a: &ReactionMatrix, mass: f64) -> Result<EquilibriumState> {
    check_mass(mass)?;
    let minors = graph::diagonal_minors(a);
    if !graph::indecomposable_from_minors(a, &minors)? {
        return Err(CrnError::NotWeaklyReversible);
    }
    let total: f64 = minors.iter().sum();
    let values = minors.iter().map(|rho| mass * rho / total).collect();
    EquilibriumState::new(values, mass, EquilibriumKind::TrueEquilibrium, a)
}

/// Least-squares solve of `[A; 1^T] x = [0; M]` by thin QR.
pub fn equilibrium_nullspace(a: &ReactionMatrix, mass: f64) -> Result<EquilibriumState> {
    check_mass(mass)?;
    let n = a.n();
    let mut aug = DMatrix::<f64>::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a.get(i, j);
        }
        aug[(n, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = mass;

    let qr = aug.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
    if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
        return Err(CrnError::NotWeaklyReversible);
    }
    let qtb = qr.q().transpose() * rhs;
    let x = r.solve_upper_triangular(&qtb).ok_or(CrnError::NotWeaklyReversible)?;
    EquilibriumState::new(x.iter().copied().collect(), mass, EquilibriumKind::TrueEquilibrium, a)
}

/// Unit-mass equilibrium of the reactions inside one strongly connected
/// component (out-flow to other components removed from the diagonal).
pub fn artificial_equilibrium(a: &ReactionMatrix, component: &[usize]) -> Result<EquilibriumState> {
    let block = a.closed_block(component);
    let eq = equilibrium_cramer(&block, 1.0)?;
    EquilibriumState::new(eq.values, 1.0, EquilibriumKind::ArtificialUnitMass, &block)
}

/// Time integrals of the averaged non-target concentrations and the mass
/// they deliver to every target component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectedMass {
    /// `int_0^inf ubar_l dt` per species (zero for target species).
    pub integrals: Vec<f64>,
    /// Injected mass per component (zero for non-target components).
    pub per_component: Vec<f64>,
    /// 2-norm condition estimate of the non-target submatrix (1 when empty).
    pub condition: f64,
}

impl InjectedMass {
    pub fn ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARNING
    }
}

/// Exact injected mass. Spatial averages obey `d/dt U = A U`; restricted to
/// the non-target species the matrix is Hurwitz, so the improper integral
/// is `-A_nt^{-1} U_nt(0)`.
pub fn injected_mass(
    a: &ReactionMatrix,
    dec: &ComponentDecomposition,
    initial_averages: &[f64],
) -> Result<InjectedMass> {
    let n = a.n();
    if initial_averages.len() != n {
        return Err(CrnError::Dimension(format!("{} averages for {n} species", initial_averages.len())));
    }
    let nt = dec.non_target_species();
    let mut integrals = vec![0.0; n];
    let mut condition = 1.0;
    if !nt.is_empty() {
        let k = nt.len();
        let sub = a.principal_submatrix(&nt);
        let sv = DMatrix::from_row_slice(k, k, &sub).singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > CONDITION_SINGULAR {
            return Err(CrnError::SingularSubmatrix { condition });
        }
        let rhs: Vec<f64> = nt.iter().map(|&l| -initial_averages[l]).collect();
        let x = linalg::solve_dense(k, sub, rhs).ok_or(CrnError::SingularSubmatrix { condition })?;
        for (&l, v) in nt.iter().zip(x) {
            integrals[l] = v;
        }
    }
    let per_component = dec
        .components
        .iter()
        .zip(&dec.kinds)
        .map(|(members, &kind)| {
            if kind != ComponentKind::Target {
                return 0.0;
            }
            members
                .iter()
                .map(|&k| (0..n).filter(|l| !members.contains(l)).map(|l| a.get(k, l) * integrals[l]).sum::<f64>())
                .sum()
        })
        .collect();
    Ok(InjectedMass { integrals, per_component, condition })
}

/// Positive equilibrium of target component `target` carrying its own
/// initial mass plus the injected mass.
pub fn target_equilibrium(
    a: &ReactionMatrix,
    dec: &ComponentDecomposition,
    target: usize,
    initial_averages: &[f64],
    injected: &InjectedMass,
) -> Result<EquilibriumState> {
    let kind = dec.kinds[target];
    if kind != ComponentKind::Target {
        return Err(CrnError::WrongComponentKind { kind: kind.as_str() });
    }
    let members = &dec.components[target];
    let own: f64 = members.iter().map(|&k| initial_averages[k]).sum();
    let mass = own + injected.per_component[target];
    let block = a.closed_block(members);
    let eq = equilibrium_cramer(&block, mass)?;
    EquilibriumState::new(eq.values, mass, EquilibriumKind::TargetWithInjection, &block)
}

//! Finite-volume discretization of `X_t = D X_xx + A X` on the unit
//! interval with homogeneous Neumann boundaries, and the implicit time
//! stepper that drives it.

use serde::Serialize;

use crate::entropy::{EntropyTrace, LongTimeReference, TraceMetadata, TraceSample, IDENTITY_FLOOR};
use crate::error::{CrnError, Result};
use crate::linalg::{BandLu, BandMatrix};
use crate::netparse::{ReactionMatrix, ReactionNetwork};

/// Uniform cell-centred grid on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CrnError::InvalidConfig(format!("grid needs at least 2 cells, got {n}")));
        }
        Ok(Self { n, dx: 1.0 / n as f64 })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `x_k = (k + 1/2) / n`.
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.n as f64
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.center(k))
    }

    /// Smallest nonzero eigenvalue of `-L` for the discrete Neumann
    /// Laplacian below: `4 n^2 sin^2(pi / 2n)`, which tends to `pi^2`.
    pub fn poincare_constant(&self) -> f64 {
        let n = self.n as f64;
        let s = (std::f64::consts::PI / (2.0 * n)).sin();
        4.0 * n * n * s * s
    }
}

/// `(u_{k-1} - 2 u_k + u_{k+1}) / dx^2` with mirrored ghost cells.
pub fn neumann_laplacian(field: &[f64], grid: &Grid) -> Vec<f64> {
    let n = field.len();
    debug_assert_eq!(n, grid.cells());
    let inv = 1.0 / (grid.dx() * grid.dx());
    (0..n)
        .map(|k| {
            let left = field[k.saturating_sub(1)];
            let right = field[(k + 1).min(n - 1)];
            (left - 2.0 * field[k] + right) * inv
        })
        .collect()
}

/// Midpoint quadrature of `field` over [0, 1].
pub fn spatial_average(field: &[f64], grid: &Grid) -> f64 {
    field.iter().sum::<f64>() * grid.dx()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationState {
    pub t: f64,
    /// One row of cell values per species.
    pub fields: Vec<Vec<f64>>,
    pub grid: Grid,
}

impl SimulationState {
    /// Initial profiles of `net` sampled at the cell centres of `grid`.
    pub fn initial(net: &ReactionNetwork, grid: Grid) -> Self {
        let fields = net
            .initial_profiles()
            .iter()
            .map(|p| grid.centers().map(|x| p.eval(x)).collect())
            .collect();
        Self { t: 0.0, fields, grid }
    }

    pub fn n_species(&self) -> usize {
        self.fields.len()
    }

    pub fn averages(&self) -> Vec<f64> {
        self.fields.iter().map(|f| spatial_average(f, &self.grid)).collect()
    }

    pub fn mass(&self) -> f64 {
        self.averages().iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.fields.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    fn pack(&self, out: &mut [f64]) {
        let n = self.n_species();
        for (i, f) in self.fields.iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                out[k * n + i] = v;
            }
        }
    }

    fn unpack(&mut self, packed: &[f64]) {
        let n = self.n_species();
        for (i, f) in self.fields.iter_mut().enumerate() {
            for (k, v) in f.iter_mut().enumerate() {
                *v = packed[k * n + i];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// First order, unconditionally stable and positivity preserving.
    BackwardEuler,
    /// Second order; not positivity preserving for rough data.
    CrankNicolson,
}

impl std::str::FromStr for TimeScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "be" | "backward-euler" => Ok(TimeScheme::BackwardEuler),
            "cn" | "crank-nicolson" => Ok(TimeScheme::CrankNicolson),
            other => Err(format!("unknown time scheme `{other}` (expected `be` or `cn`)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub linear_solver_tol: f64,
    pub scheme: TimeScheme,
    /// Overrides the network's `grid` statement when set.
    pub grid_cells: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 40.0,
            sample_every: 10,
            linear_solver_tol: 1e-12,
            scheme: TimeScheme::BackwardEuler,
            grid_cells: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(CrnError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(CrnError::InvalidConfig(format!("t_end must be at least dt, got {}", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(CrnError::InvalidConfig("sample_every must be at least 1".into()));
        }
        if !(self.linear_solver_tol > 0.0) {
            return Err(CrnError::InvalidConfig("linear solver tolerance must be positive".into()));
        }
        if let Some(n) = self.grid_cells {
            if n < 2 {
                return Err(CrnError::InvalidConfig(format!("grid needs at least 2 cells, got {n}")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

const MAX_REFINEMENTS: usize = 3;

/// Pre-factored implicit step for a fixed operator, grid and `dt`.
#[derive(Debug, Clone)]
pub struct Stepper {
    n_species: usize,
    dt: f64,
    tol: f64,
    implicit: BandMatrix,
    lu: BandLu,
    /// Right-hand side operator `I + dt/2 K` (Crank-Nicolson only).
    explicit: Option<BandMatrix>,
    packed: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

/// Assembles `I + theta K` for `K = D (x) L + A (x) I` in cell-major order.
fn assemble(a: &ReactionMatrix, diffusions: &[f64], grid: &Grid, theta: f64) -> BandMatrix {
    let ns = a.n();
    let nc = grid.cells();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut m = BandMatrix::zeros(ns * nc, ns);
    for k in 0..nc {
        for i in 0..ns {
            let row = k * ns + i;
            m.add(row, row, 1.0);
            for j in 0..ns {
                let aij = a.get(i, j);
                if aij != 0.0 {
                    m.add(row, k * ns + j, theta * aij);
                }
            }
            let d = diffusions[i];
            if d != 0.0 {
                if k > 0 {
                    m.add(row, row - ns, theta * d * inv);
                    m.add(row, row, -theta * d * inv);
                }
                if k + 1 < nc {
                    m.add(row, row + ns, theta * d * inv);
                    m.add(row, row, -theta * d * inv);
                }
            }
        }
    }
    m
}

impl Stepper {
    pub fn new(
        a: &ReactionMatrix,
        diffusions: &[f64],
        grid: &Grid,
        dt: f64,
        scheme: TimeScheme,
        tol: f64,
    ) -> Result<Self> {
        if diffusions.len() != a.n() {
            return Err(CrnError::Dimension(format!("{} diffusions for {} species", diffusions.len(), a.n())));
        }
        let theta = match scheme {
            TimeScheme::BackwardEuler => dt,
            TimeScheme::CrankNicolson => dt / 2.0,
        };
        let implicit = assemble(a, diffusions, grid, -theta);
        let explicit = matches!(scheme, TimeScheme::CrankNicolson).then(|| assemble(a, diffusions, grid, theta));
        let lu = implicit
            .clone()
            .factor()
            .ok_or(CrnError::SolverDivergence { residual: f64::INFINITY, tolerance: tol, iterations: 0 })?;
        let size = implicit.dim();
        Ok(Self {
            n_species: a.n(),
            dt,
            tol,
            implicit,
            lu,
            explicit,
            packed: vec![0.0; size],
            rhs: vec![0.0; size],
            work: vec![0.0; size],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step in place.
    pub fn advance(&mut self, state: &mut SimulationState) -> Result<()> {
        debug_assert_eq!(state.n_species(), self.n_species);
        state.pack(&mut self.packed);
        match &self.explicit {
            Some(op) => op.mul_vec(&self.packed, &mut self.rhs),
            None => self.rhs.copy_from_slice(&self.packed),
        }
        self.packed.copy_from_slice(&self.rhs);
        self.lu.solve_in_place(&mut self.packed);

        let bnorm = self.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut iterations = 0;
        loop {
            self.implicit.mul_vec(&self.packed, &mut self.work);
            let mut rmax: f64 = 0.0;
            for (w, b) in self.work.iter_mut().zip(&self.rhs) {
                *w = b - *w;
                rmax = rmax.max(w.abs());
            }
            let residual = if bnorm == 0.0 { rmax } else { rmax / bnorm };
            if residual <= self.tol {
                break;
            }
            if iterations == MAX_REFINEMENTS {
                return Err(CrnError::SolverDivergence { residual, tolerance: self.tol, iterations });
            }
            self.lu.solve_in_place(&mut self.work);
            for (x, c) in self.packed.iter_mut().zip(&self.work) {
                *x += c;
            }
            iterations += 1;
        }
        state.unpack(&self.packed);
        state.t += self.dt;
        Ok(())
    }
}

/// One implicit step of `state` under `(A, D)`.
pub fn step(
    state: &SimulationState,
    a: &ReactionMatrix,
    diffusions: &[f64],
    dt: f64,
    scheme: TimeScheme,
) -> Result<SimulationState> {
    let mut stepper = Stepper::new(a, diffusions, &state.grid, dt, scheme, SolverConfig::default().linear_solver_tol)?;
    let mut next = state.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

/// Time integrals of the species averages accumulated step by step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageIntegrals {
    /// Composite trapezoid rule.
    pub trapezoid: Vec<f64>,
    /// Right-endpoint rule; this is the quadrature a backward-Euler
    /// trajectory satisfies exactly.
    pub right_endpoint: Vec<f64>,
}

impl AverageIntegrals {
    /// The rule consistent with `scheme`: right endpoint for backward
    /// Euler, trapezoid for Crank-Nicolson.
    pub fn consistent_with(&self, scheme: TimeScheme) -> &[f64] {
        match scheme {
            TimeScheme::BackwardEuler => &self.right_endpoint,
            TimeScheme::CrankNicolson => &self.trapezoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRun {
    pub trace: EntropyTrace,
    pub final_state: SimulationState,
    pub integrals: AverageIntegrals,
    pub initial_mass: f64,
    /// `max_t |mass(t) - mass(0)| / mass(0)` over every step.
    pub max_mass_drift: f64,
    /// Smallest cell value seen over every step.
    pub min_value: f64,
    /// Worst `|dE/dt + D| / D` with `dE/dt` from central differences over
    /// consecutive steps, while `E > IDENTITY_FLOOR * E(0)` and `D > 0`.
    pub dissipation_identity: f64,
    pub steps: usize,
}

/// Grid the run will use: the config override or the network's own.
pub fn resolve_grid(net: &ReactionNetwork, config: &SolverConfig) -> Result<Grid> {
    Grid::new(config.grid_cells.unwrap_or(net.grid_cells()))
}

/// Integrates the network from its initial profiles to `config.t_end`,
/// sampling entropy, dissipation, distances and masses against
/// `reference` every `config.sample_every` steps (and at the last step).
pub fn simulate(net: &ReactionNetwork, config: &SolverConfig, reference: &LongTimeReference) -> Result<SimulationRun> {
    config.validate()?;
    let grid = resolve_grid(net, config)?;
    let a = ReactionMatrix::from_network(net);
    let mut stepper = Stepper::new(&a, net.diffusions(), &grid, config.dt, config.scheme, config.linear_solver_tol)?;
    let mut state = SimulationState::initial(net, grid);
    let initial_mass = state.mass();
    if !(initial_mass > 0.0) {
        return Err(CrnError::InvalidConfig("initial profiles have zero mass on this grid".into()));
    }

    let steps = config.steps();
    let mut samples = Vec::with_capacity(steps / config.sample_every + 2);
    samples.push(TraceSample::measure(&state, net, reference));
    let ns = net.n_species();
    let mut trapezoid = vec![0.0; ns];
    let mut right_endpoint = vec![0.0; ns];
    let mut prev_avg = state.averages();
    let mut max_mass_drift: f64 = 0.0;
    let mut min_value = state.min_value();
    let e0 = samples[0].entropy;
    // (E, D) at the previous two steps
    let mut before = (f64::NAN, f64::NAN);
    let mut prev = (e0, samples[0].dissipation);
    let mut dissipation_identity: f64 = 0.0;

    for s in 1..=steps {
        stepper.advance(&mut state)?;
        // exact time stamp, no accumulated round-off
        state.t = s as f64 * config.dt;
        let avg = state.averages();
        for i in 0..ns {
            trapezoid[i] += 0.5 * config.dt * (prev_avg[i] + avg[i]);
            right_endpoint[i] += config.dt * avg[i];
        }
        let mass: f64 = avg.iter().sum();
        max_mass_drift = max_mass_drift.max((mass - initial_mass).abs() / initial_mass);
        min_value = min_value.min(state.min_value());
        prev_avg = avg;
        let (e, d, _) = reference.functionals(&state, net);
        if s >= 2 && prev.0 > IDENTITY_FLOOR * e0 && prev.1 > 0.0 {
            let dedt = (e - before.0) / (2.0 * config.dt);
            dissipation_identity = dissipation_identity.max((dedt + prev.1).abs() / prev.1);
        }
        before = prev;
        prev = (e, d);
        if s % config.sample_every == 0 || s == steps {
            samples.push(TraceSample::measure(&state, net, reference));
        }
    }

    let trace = EntropyTrace {
        samples,
        metadata: TraceMetadata { network_hash: net.content_hash(), config: *config, grid_cells: grid.cells() },
    };
    Ok(SimulationRun {
        trace,
        final_state: state,
        integrals: AverageIntegrals { trapezoid, right_endpoint },
        initial_mass,
        max_mass_drift,
        min_value,
        dissipation_identity,
        steps,
    })
}

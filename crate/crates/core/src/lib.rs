//! Analysis of first-order reaction-diffusion networks: graph structure,
//! balance properties and equilibria, a finite-volume simulator, and
//! entropy-decay measurement against constructive rate bounds.

pub mod analysis;
pub mod entropy;
pub mod equilibria;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod netparse;
pub mod sim;
pub mod verify;

pub use analysis::{analyze, analyze_on_grid, Analysis, AnalysisReport};
pub use entropy::{
    eed_lambda_lower_bound, fit_decay_rate, verify_eed, DecayReport, EedBound, EntropyTrace, LongTimeReference,
    TraceSample,
};
pub use equilibria::{EquilibriumKind, EquilibriumState, InjectedMass};
pub use error::{CrnError, ParseError, ParseErrorKind, Result};
pub use graph::{ComponentDecomposition, ComponentKind};
pub use netparse::{parse_network, InitialProfile, ReactionMatrix, ReactionNetwork};
pub use sim::{simulate, Grid, SimulationRun, SimulationState, SolverConfig, TimeScheme};
pub use verify::{verify, Check, Verdict, Verification};

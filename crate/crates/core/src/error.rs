use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CrnError>;

/// What went wrong while reading a network file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("species `{0}` declared more than once")]
    DuplicateSpecies(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("rate constant must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("self-reaction `{0} -> {0}` is not allowed")]
    SelfReaction(String),
    #[error("reaction `{0} -> {1}` declared more than once")]
    DuplicateReaction(String, String),
    #[error("diffusion coefficient must be nonnegative, got {0}")]
    NegativeDiffusion(f64),
    #[error("`{statement}` given more than once for species `{species}`")]
    DuplicateStatement { statement: &'static str, species: String },
    #[error("invalid initial profile: {0}")]
    InvalidProfile(String),
    #[error("grid must have at least 2 cells, got {0}")]
    InvalidGrid(String),
    #[error("no species declared")]
    NoSpecies,
    #[error("total initial mass is zero")]
    ZeroInitialMass,
}

/// Parse failure with the 1-based line it occurred on (0 when the
/// failure concerns the file as a whole).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(line: usize, kind: ParseErrorKind) -> Self {
        Self { line, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrnError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("reaction graph is disconnected ({components} undirected pieces); split the file into one network per piece")]
    DisconnectedNetwork { components: usize },

    #[error("diagonal minor rho_{index}{index} = {value:e} is within the indeterminate band around tolerance {tolerance:e}")]
    IndeterminateMinor { index: usize, value: f64, tolerance: f64 },

    #[error("diagonal minor rho_{index}{index} = {value:e} has the wrong sign for an indecomposable matrix")]
    MinorSignViolation { index: usize, value: f64 },

    #[error("network is not weakly reversible; no unique positive equilibrium")]
    NotWeaklyReversible,

    #[error("equilibrium component {index} is not positive ({value:e})")]
    NonPositiveEquilibrium { index: usize, value: f64 },

    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),

    #[error("non-target reaction submatrix is numerically singular (condition estimate {condition:e})")]
    SingularSubmatrix { condition: f64 },

    #[error("linear solver did not reach relative residual {tolerance:e} (got {residual:e} after {iterations} refinements)")]
    SolverDivergence { residual: f64, tolerance: f64, iterations: usize },

    #[error("operation is not defined for {kind} components")]
    WrongComponentKind { kind: &'static str },

    #[error("species {species} has zero diffusion; the constructive bound needs all d_i > 0")]
    DegenerateDiffusion { species: usize },

    #[error("relative entropy never dropped below half its initial value")]
    InsufficientDecay,

    #[error("need at least {needed} samples above the floor, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl CrnError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            CrnError::Parse(_) => "parse",
            CrnError::DisconnectedNetwork { .. } => "disconnected_network",
            CrnError::IndeterminateMinor { .. } => "indeterminate_minor",
            CrnError::MinorSignViolation { .. } => "minor_sign_violation",
            CrnError::NotWeaklyReversible => "not_weakly_reversible",
            CrnError::NonPositiveEquilibrium { .. } => "non_positive_equilibrium",
            CrnError::InvalidMass(_) => "invalid_mass",
            CrnError::SingularSubmatrix { .. } => "singular_submatrix",
            CrnError::SolverDivergence { .. } => "solver_divergence",
            CrnError::WrongComponentKind { .. } => "wrong_component_kind",
            CrnError::DegenerateDiffusion { .. } => "degenerate_diffusion",
            CrnError::InsufficientDecay => "insufficient_decay",
            CrnError::InsufficientSamples { .. } => "insufficient_samples",
            CrnError::InvalidConfig(_) => "invalid_config",
            CrnError::Dimension(_) => "dimension",
        }
    }
}

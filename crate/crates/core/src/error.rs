use thiserror::Error;

/// Errors raised anywhere in the reduction pipeline.
///
/// Each variant names the stage it comes from so the CLI can report
/// provenance in its machine-readable error record.
#[derive(Debug, Error)]
pub enum SsmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed model document: {0}")]
    Malformed(String),

    #[error("mass matrix is not invertible")]
    SingularMass,

    #[error("nonlinear term of degree {degree} < 2 in row {row}")]
    LowDegreeNonlinearity { row: usize, degree: u32 },

    #[error("complex coefficient in a real nonlinearity (row {row})")]
    ComplexNonlinearity { row: usize },

    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),

    #[error("unstable linearization: eigenvalue {re:+.6e}{im:+.6e}i has non-negative real part")]
    UnstableLinearization { re: f64, im: f64 },

    #[error("defective eigenvalue {re:+.6e}{im:+.6e}i in the requested set")]
    DefectiveEigenvalue { re: f64, im: f64 },

    #[error("underdamped assumption violated: mode {0} has a real eigenvalue")]
    RealEigenvalueSelected(usize),

    #[error("invalid master selection: {0}")]
    InvalidSelection(String),

    #[error("no external resonance at this \u{3a9} = {0}")]
    NoExternalResonance(f64),

    #[error("undetected resonance at multi-index {0}; increase tolerance or order of R_i enumeration")]
    UndetectedResonance(String),

    #[error("linear solve failure: {0}")]
    LinearSolve(String),

    #[error("forcing resonates with a non-master mode (index {0}); enlarge master subspace")]
    NonMasterForcingResonance(usize),

    #[error("polar singularity (rho_{index} = {rho:.3e}); switch to Cartesian")]
    PolarSingularity { index: usize, rho: f64 },

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("no equilibrium attractor; expect quasi-periodic response")]
    NoEquilibriumAttractor,

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("forward simulation did not reach a periodic steady state within {periods} periods")]
    NoSteadyState { periods: usize },

    #[error("root finding failure: {0}")]
    RootFinding(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SsmError {
    /// Pipeline stage that produced the error.
    pub fn module(&self) -> &'static str {
        use SsmError::*;
        match self {
            DimensionMismatch(_) | Malformed(_) | SingularMass | LowDegreeNonlinearity { .. }
            | ComplexNonlinearity { .. } | Json(_) | Io(_) => "model-core",
            EigenFailure(_) | UnstableLinearization { .. } | DefectiveEigenvalue { .. }
            | RealEigenvalueSelected(_) | InvalidSelection(_) | NoExternalResonance(_) => {
                "spectral"
            }
            UndetectedResonance(_) | LinearSolve(_) => "ssm-auto",
            NonMasterForcingResonance(_) => "ssm-nonauto",
            PolarSingularity { .. } => "reduced-dynamics",
            NewtonDivergence(_) | NoEquilibriumAttractor => "continuation",
            Integration(_) | NoSteadyState { .. } => "oracle",
            RootFinding(_) | Quadrature(_) => "models-builtin",
            UnknownStrategy { .. } | InvalidParameter(_) => "cli",
        }
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            SsmError::DimensionMismatch(_)
                | SsmError::Malformed(_)
                | SsmError::LowDegreeNonlinearity { .. }
                | SsmError::ComplexNonlinearity { .. }
                | SsmError::UnknownStrategy { .. }
                | SsmError::InvalidParameter(_)
                | SsmError::InvalidSelection(_)
                | SsmError::Json(_)
                | SsmError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SsmError>;

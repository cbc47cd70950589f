use thiserror::Error;

pub type Result<T, E = ReachError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("(A, b) is not controllable: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    NotControllable { pivot: f64, threshold: f64 },

    #[error("eigenvalues are not distinct: min separation {separation:.3e} <= {threshold:.3e}")]
    RepeatedEigenvalues { separation: f64, threshold: f64 },

    #[error("M A M^-1 deviates from companion form by {deviation:.3e} (limit {limit:.1e})")]
    StructureViolation { deviation: f64, limit: f64 },

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tol:.1e}")]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("time {s} lies outside the envelope horizon [0, {horizon}]")]
    OutOfHorizon { s: f64, horizon: f64 },

    #[error("switching parameters are not an ordered tuple in [0, {t}]: {sigma:?}")]
    SigmaOutOfChamber { sigma: Vec<f64>, t: f64 },

    #[error("zero direction passed to a support function")]
    ZeroDirection,

    #[error("wrong dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("grid too small: {0}")]
    DimensionTooSmall(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ReachError {
    /// Stable machine-readable identifier, printed by the CLI next to the message.
    pub fn code(&self) -> &'static str {
        match self {
            ReachError::InvalidProblem(_) => "invalid_problem",
            ReachError::NotControllable { .. } => "not_controllable",
            ReachError::RepeatedEigenvalues { .. } => "repeated_eigenvalues",
            ReachError::StructureViolation { .. } => "structure_violation",
            ReachError::ImaginaryResidue { .. } => "imaginary_residue",
            ReachError::OutOfHorizon { .. } => "out_of_horizon",
            ReachError::SigmaOutOfChamber { .. } => "sigma_out_of_chamber",
            ReachError::ZeroDirection => "zero_direction",
            ReachError::WrongDimension { .. } => "wrong_dimension",
            ReachError::DimensionTooSmall(_) => "dimension_too_small",
            ReachError::Parse(_) => "parse_error",
            ReachError::Validation(_) => "validation_error",
            ReachError::Io(_) => "io_error",
        }
    }

    /// Process exit code: 2 for bad input, 4 for failed numerical preconditions.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReachError::InvalidProblem(_) | ReachError::Parse(_) | ReachError::Validation(_) => 2,
            ReachError::NotControllable { .. }
            | ReachError::RepeatedEigenvalues { .. }
            | ReachError::StructureViolation { .. }
            | ReachError::ImaginaryResidue { .. } => 4,
            ReachError::OutOfHorizon { .. }
            | ReachError::SigmaOutOfChamber { .. }
            | ReachError::ZeroDirection
            | ReachError::WrongDimension { .. }
            | ReachError::DimensionTooSmall(_) => 2,
            ReachError::Io(_) => 1,
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Infeasible,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit index {index} out of range for {n_units} units")]
    IndexOutOfRange { index: usize, n_units: usize },

    #[error("self-loop on unit {0}")]
    SelfLoop(usize),

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("stratum {0} contains no units")]
    EmptyCell(String),

    #[error("exposure mapping failed for unit {unit}: {message}")]
    MappingFailure { unit: usize, message: String },

    #[error("exposure value {0} is not in the mapping's declared value set")]
    UndeclaredExposure(u32),

    #[error("infeasible assignment counts: {0}")]
    InfeasibleCounts(String),

    #[error("missing nuisance parameter for {0}")]
    MissingParameter(String),

    #[error("super-focal set for {0} is empty")]
    EmptySuperFocal(String),

    #[error(
        "acceptance budget exhausted after {attempts} candidates for draw {draw}; \
         most frequent failure: {failing}"
    )]
    AcceptanceBudgetExhausted {
        draw: usize,
        attempts: usize,
        failing: String,
    },

    #[error("observed focal selection left an arm with fewer than {min_per_arm} units after {retries} retries")]
    ArmEmptyAfterRetries { retries: usize, min_per_arm: usize },

    #[error("expected focal count {0} is too small to estimate two variances (need at least 4)")]
    TooFewFocal(usize),

    #[error("{cell}: arm {arm} has {count} units, at least 2 are needed for a variance")]
    TooFewUnits { cell: String, arm: u8, count: usize },

    #[error("weights mismatch: {0}")]
    WeightMismatch(String),

    #[error("{cell}: treatment arm {arm} is empty")]
    EmptyArm { cell: String, arm: u8 },

    #[error("sample split infeasible: {0}")]
    SplitInfeasible(String),

    #[error("confidence interval cannot be built for {0}")]
    DegenerateInterval(String),

    #[error("regular graph generation gave up after {0} attempts")]
    GenerationBudgetExhausted(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: treatment value {value:?} is not 0 or 1")]
    NonBinaryTreatment { line: usize, value: String },

    #[error("unit {unit}: treatment value {value} is not 0 or 1")]
    InvalidTreatment { unit: usize, value: u8 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::AcceptanceBudgetExhausted { .. }
            | Error::ArmEmptyAfterRetries { .. }
            | Error::TooFewFocal(_)
            | Error::EmptySuperFocal(_)
            | Error::SplitInfeasible(_)
            | Error::GenerationBudgetExhausted(_)
            | Error::InfeasibleCounts(_) => ErrorKind::Infeasible,
            _ => ErrorKind::Data,
        }
    }

    /// Process exit code: 1 usage, 2 data/validation, 3 infeasible conditioning.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Infeasible => 3,
        }
    }
}

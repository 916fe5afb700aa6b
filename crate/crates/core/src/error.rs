use thiserror::Error;

/// Errors raised anywhere in the lab.
///
/// Each variant maps to a stable machine-readable code (see [`LabError::code`])
/// and to a CLI exit class: input problems exit with 1, numerical or
/// statistical failures with 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid specification: {0}")]
    Validation(String),
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("process is not stationary: {0}")]
    NonStationary(String),
    #[error("FCLT precondition violated: {0}")]
    FcltPrecondition(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("explosion guard tripped: {events} events exceeded the cap of {cap}")]
    Explosion { events: usize, cap: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("state coverage: {0}")]
    Coverage(String),
    #[error("config file not found: {0}")]
    ConfigNotFound(String),
    #[error("config schema violation: {}", .0.join("; "))]
    Schema(Vec<String>),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub fn code(&self) -> &'static str {
        match self {
            LabError::Domain(_) => "DOMAIN",
            LabError::Validation(_) => "INVALID_SPEC",
            LabError::NotErgodic(_) => "NOT_ERGODIC",
            LabError::Divergent(_) => "DIVERGENT",
            LabError::NonStationary(_) => "NONSTATIONARY",
            LabError::FcltPrecondition(_) => "FCLT_PRECONDITION",
            LabError::Configuration(_) => "CONFIGURATION",
            LabError::Numerical(_) => "NUMERICAL",
            LabError::Explosion { .. } => "EXPLOSION",
            LabError::InsufficientData(_) => "INSUFFICIENT_DATA",
            LabError::Coverage(_) => "COVERAGE",
            LabError::ConfigNotFound(_) => "CONFIG_NOT_FOUND",
            LabError::Schema(_) => "SCHEMA",
            LabError::VerificationFailed(_) => "VERIFY_FAILED",
            LabError::Io(_) => "IO",
        }
    }

    /// CLI exit code: 1 for malformed input or unmet preconditions, 2 when the
    /// computation itself failed or a statistical check did not pass.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Numerical(_)
            | LabError::Explosion { .. }
            | LabError::VerificationFailed(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

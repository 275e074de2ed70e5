use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported qubit count {0} (supported: 1..=3)")]
    UnsupportedQubitCount(usize),

    #[error("target qubit {0} appears more than once")]
    RepeatedTarget(usize),

    #[error("target qubit {target} out of range for a {n_qubits}-qubit register")]
    TargetOutOfRange { target: usize, n_qubits: usize },

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (max |U^dag U - I| = {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace {0} is not 1")]
    BadTrace(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("ill-conditioned confusion matrix (condition number {condition_number:e} > cap {cap:e})")]
    IllConditioned { condition_number: f64, cap: f64 },

    #[error("parameter vector has length {found}, circuit expects {expected}")]
    ParamLength { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown gate name `{0}`")]
    UnknownGate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

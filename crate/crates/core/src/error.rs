use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("invalid subsystem: {0}")]
    InvalidSubsystem(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid stabilizer group: {0}")]
    InvalidStabilizer(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver failure ({context}): status {status}")]
    Solver { context: String, status: String },

    #[error("t too large: A(t) is not positive definite at t = {t:e}")]
    TTooLarge { t: f64 },

    #[error("no counterexample exists for D({n},{k}): no weight l with |l - k| >= 3")]
    NoCounterexample { n: usize, k: usize },

    #[error("missing marginal pairs: {}", format_pairs(.0))]
    MissingPairs(Vec<(usize, usize)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(i, j)| format!("[{i},{j}]"))
        .collect::<Vec<_>>()
        .join(", ")
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigenvalue {eigenvalue:.3e} lies outside the domain of the matrix function")]
    SpectrumOutOfDomain { eigenvalue: f64 },

    #[error("not a density matrix: {0}")]
    NotADensity(String),

    #[error("state is not faithful (minimal eigenvalue {min_eigenvalue:.3e})")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("map is not completely positive (minimal Choi eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("map is not unital (residual {residual:.3e})")]
    NotUnital { residual: f64 },

    #[error("map does not intertwine the states (residual {residual:.3e})")]
    IntertwiningViolated { residual: f64 },

    #[error("map does not preserve the system state (residual {residual:.3e})")]
    StateNotPreserved { residual: f64 },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("states do not match (residual {residual:.3e})")]
    StateMismatch { residual: f64 },

    #[error("conditional-expectation balance violated (residual {residual:.3e})")]
    BalanceViolated { residual: f64 },

    #[error("dynamics labels do not match: {0}")]
    LabelMismatch(String),

    #[error("expected a diagonal matrix: {0}")]
    NonDiagonal(String),

    #[error("inconsistent moments in row {row}: {reason}")]
    MomentInconsistency { row: usize, reason: String },

    #[error("oracle precondition violated: {0}")]
    PatternViolated(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

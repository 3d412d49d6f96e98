use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigensolver did not converge for a {dim}x{dim} matrix (residual {residual:e})")]
    NoConvergence { dim: usize, residual: f64 },

    #[error("function is undefined or non-finite at eigenvalue {eigenvalue}")]
    FunctionDomain { eigenvalue: f64 },

    #[error("{what} is not positive definite (offending eigenvalue {eigenvalue})")]
    NotPositiveDefinite { what: String, eigenvalue: f64 },

    #[error("sign is ambiguous: eigenvalue {eigenvalue} is numerically zero")]
    SingularSign { eigenvalue: f64 },

    #[error("perturbation is unbounded relative to |H|: |H| has a kernel where A is nonzero (|A P0| = {kernel_norm:e})")]
    UnboundedRatio { kernel_norm: f64 },

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    NearSingular { condition: f64 },

    #[error("factored resolvent failed: F_zeta condition {f_condition:e}, C_zeta condition {c_condition:e}")]
    FactoredSingular { f_condition: f64, c_condition: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("eigenvalue cluster at {eigenvalue} is not isolated (gap {gap:e})")]
    Degenerate { eigenvalue: f64, gap: f64 },

    #[error("impenetrability certificate failed at epsilon = {epsilon}: eigenvalue {eigenvalue} is within {distance:e} of guard {guard}")]
    Certificate {
        epsilon: f64,
        eigenvalue: f64,
        guard: f64,
        distance: f64,
    },

    #[error("impenetrability interval ({lower}, {upper}) is empty; the bound is not claimed")]
    EmptySeparation { lower: f64, upper: f64 },

    #[error("hypothesis fails at eta = {eta}: eigenvalue {eigenvalue} lies in the protected interval")]
    Hypothesis { eta: f64, eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate expansion: alpha_tilde = {alpha_tilde:e} at flux ratio {flux_ratio}")]
    DegenerateExpansion { alpha_tilde: f64, flux_ratio: f64 },

    #[error("flux ratio {flux_ratio}: {source}")]
    AtFlux {
        flux_ratio: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("syntax error on line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("semantic error on line {line}: {reason}")]
    Semantic { line: usize, reason: String },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("coupling coefficient is zero; flux line cannot bias the SNAILs")]
    ZeroCoupling,

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("singular jacobian at pivot {0}")]
    SingularJacobian(usize),

    #[error("harmonic balance did not converge after {iterations} iterations (residual history {history:?})")]
    HbNoConvergence { iterations: usize, history: Vec<f64> },

    #[error("transient: {0}")]
    Transient(String),

    #[error("circuit has {cells} cells; transient guard is {limit} (set override to run anyway)")]
    GuardExceeded { cells: usize, limit: usize },

    #[error("series too short: {0}")]
    InsufficientLength(String),
}

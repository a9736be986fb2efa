use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("flatness violation: {0}")]
    FlatnessViolation(String),

    #[error("division by a zero monomial")]
    DivisionByZeroMonomial,

    #[error("quadrature did not converge for oscillation {osc} on [{a}, {b}]")]
    QuadratureNonConvergence { osc: i64, a: f64, b: f64 },

    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("infeasible support: {0}")]
    InfeasibleSupport(String),

    #[error("bound unreachable after {escalations} escalations: {detail}")]
    BoundUnreachable { escalations: u32, detail: String },

    #[error("assertion failed in {check}: {detail}")]
    AssertionFailure { check: String, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        Error::Parse { position: format!("line {} column {}", e.line(), e.column()), message: e.to_string() }
    }
}

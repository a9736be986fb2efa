use cascade_core::Error;

pub const EXIT_UNREACHABLE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_SWEEP: i32 = 5;
pub const EXIT_INTERNAL: i32 = 1;

/// A message and the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        Self::invalid(format!("{what}: {e}"))
    }

    pub fn from_core(e: Error) -> Self {
        let code = match e {
            Error::BoundUnreachable { .. } | Error::InfeasibleSupport(_) => EXIT_UNREACHABLE,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::VariantMismatch(_) => EXIT_INVALID,
            _ => EXIT_INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

use crate::optim::RestartTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape { context: &'static str, expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("{0}: payload shorter than its header declares")]
    Length(String),
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("checksum mismatch: file is corrupted")]
    Checksum,
    #[error("file is truncated")]
    Truncated,
    #[error("optimization failed: every one of {} restarts ended non-finite", traces.len())]
    OptimizationFailed { traces: Vec<RestartTrace> },
    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("attribution failed: no generator produced a finite reconstruction")]
    AttributionFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Usage(_) | Error::Shape { .. } => ErrorClass::Usage,
            Error::NonFinite(_)
            | Error::OptimizationFailed { .. }
            | Error::Diverged { .. }
            | Error::AttributionFailed => ErrorClass::Numeric,
            Error::Format { .. }
            | Error::Length(_)
            | Error::Consistency(_)
            | Error::Version { .. }
            | Error::Checksum
            | Error::Truncated
            | Error::Io(_) => ErrorClass::Data,
        }
    }
}

use std::path::PathBuf;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("singular pivot at row {row} (|pivot| = {magnitude:e})")]
    SingularPivot { row: usize, magnitude: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: malformed entry `{text}`")]
    MalformedLine { line: usize, text: String },

    #[error("value out of range for `{key}`: {reason}")]
    ValueOutOfRange { key: String, reason: String },

    #[error("ramp filter needs at least 4 transverse samples, got {0}")]
    TooFewSamples(usize),

    #[error("ground truth has zero norm")]
    ZeroTruth,

    #[error("conjugate point or blow-up near tau = {tau} (|det| = {det:e})")]
    ConjugatePoint { tau: f64, det: f64 },

    #[error("Riccati invariant violated at tau = {tau}: {what}")]
    InvariantViolated { tau: f64, what: String },

    #[error("wave-equation coefficient degenerate at step {step} (min coefficient {min_coeff:e})")]
    CoefficientDegenerate { step: usize, min_coeff: f64 },

    #[error("CFL number {0} exceeds 0.5")]
    CflViolation(f64),

    #[error("integral identity is degenerate: both sides below 1e-14")]
    DegenerateIdentity,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than internal failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::SingularPivot { .. } | Error::InvariantViolated { .. }
        )
    }
}

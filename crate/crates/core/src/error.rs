use thiserror::Error;

/// Errors produced by the coupling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("partial map: point has no image")]
    PartialMap,

    #[error("kernel domain mismatch: {0}")]
    KernelDomainMismatch(String),

    #[error("not absolutely continuous on A: {0}")]
    NotAbsolutelyContinuous(String),

    #[error("unbound variable {0}")]
    UnboundVariable(String),

    #[error("truncation overflow: {0}")]
    TruncationOverflow(String),

    #[error("polynomial parse error at line {line}: {message}")]
    PolyParse { line: usize, message: String },

    #[error("non-finite state")]
    NonFiniteState,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("density overflow")]
    DensityOverflow,

    #[error("log of non-positive value at index {0}")]
    LogOfNonPositive(usize),

    #[error("not enough points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("sample too large: {size} points exceeds cap {cap}")]
    SampleTooLarge { size: usize, cap: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("no dissipative fit: best a = {0}")]
    NoDissipativeFit(f64),

    #[error("noise path format: {0}")]
    NoiseFormat(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

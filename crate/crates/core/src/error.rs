use std::io;

/// Errors raised by the pipeline model, solvers, estimators and file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid gas constants: {0}")]
    InvalidGas(String),
    #[error("invalid flow boundary: {0}")]
    InvalidBoundary(String),
    #[error("invalid leak scenario: {0}")]
    InvalidScenario(String),
    #[error("x = {x} m lies outside the domain [{lo}, {hi}] m")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid time {0} s (must be finite and non-negative)")]
    InvalidTime(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sample at t = {t} s has p = {p} Pa above the reference pressure; data is not decaying")]
    NonDecayingData { t: f64, p: f64 },
    #[error("sample {index}: {msg}")]
    InvalidSample { index: usize, msg: String },
    #[error("all sample times are zero")]
    DegenerateTimes,

    #[error("empty grid")]
    EmptyGrid,
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numerical blow-up at t = {t} s")]
    NumericalBlowup { t: f64 },

    #[error("no leak model: the leak coefficient K is zero")]
    NoLeakModel,
    #[error("cannot normalize a curve that is identically zero")]
    DegenerateCurve,
    #[error("no leak detected: fitted decay rate {beta:e} 1/s is below the detection floor")]
    NoLeakDetected { beta: f64 },
    #[error("the admissible time window is empty")]
    WindowEmpty,

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: time {t} s does not increase")]
    Order { line: u64, t: f64 },
    #[error("input contains no samples")]
    EmptyInput,
    #[error("config: {0}")]
    Config(String),
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            kind => Error::Parse { line, msg: format!("{kind:?}") },
        }
    }
}

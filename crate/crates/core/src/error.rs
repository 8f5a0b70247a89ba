use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("sample at t={t}, x={x:?} lies on the singular locus")]
    SingularSample { t: f64, x: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degenerate test function: gradient energy {gradient_energy:e} vs value energy {value_energy:e}")]
    DegenerateTest { gradient_energy: f64, value_energy: f64 },

    #[error("field `{0}` has no declared sup-bound")]
    UnboundedInput(String),

    #[error("mollifier schedule failure at m={m}: {reason}")]
    ScheduleFailure { m: u32, reason: String },

    #[error("advection CFL number {cfl:.4} exceeds 0.5 (b_max={b_max:.4}, h_t={h_t:e}, h_x={h_x:e})")]
    StabilityViolation { cfl: f64, b_max: f64, h_t: f64, h_x: f64 },

    #[error("field `{0}` is singular; only bounded (mollified) fields enter the solver")]
    RejectedSingularField(String),

    #[error("q={q} outside the admissible interval ]{lo}, {hi}[")]
    QOutOfRange { q: f64, lo: f64, hi: f64 },

    #[error("p={p} outside the admissible interval ]{lo}, inf[")]
    POutOfRange { p: f64, lo: f64 },

    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("time {t} not recorded in ensemble")]
    TimeUnavailable { t: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

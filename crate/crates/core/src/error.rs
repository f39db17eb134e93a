use thiserror::Error;

/// Errors raised by the numerical kernels and the geometric pipeline.
///
/// Report-only checks never produce errors; they return residual reports
/// instead. Structured outcomes such as extinction or an unbounded `ν₊`
/// are modelled as values, not errors.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("invalid tolerance configuration: {0}")]
    InvalidTolerance(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("step size underflow at t = {t_last} (last valid time)")]
    StepUnderflow { t_last: f64 },

    #[error("non-finite state at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("eigensolver did not converge in {iterations} iterations (final residual {})", residuals.last().copied().unwrap_or(f64::NAN))]
    EigenNonConvergence { iterations: usize, residuals: Vec<f64> },

    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric model: {0}")]
    InvalidModel(String),

    #[error("time {t} outside history range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("positivity lost at t = {t} (min u = {min_u:e})")]
    PositivityLoss { t: f64, min_u: f64 },

    #[error("time {t} is not after the birth time {birth}")]
    BeforeBirth { t: f64, birth: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("geodesic blew up at eta = {eta}")]
    GeodesicBlowUp { eta: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

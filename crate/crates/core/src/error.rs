use thiserror::Error;

pub type Result<T> = std::result::Result<T, DdError>;

/// Failures raised by the analytic, numerical and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("drift or volatility is not finite at u = {at}")]
    NonFiniteCoefficient { at: f64 },

    #[error("boundary value solve diverged: {0}")]
    SolveDiverged(String),

    #[error("quadrature on [{lo}, {hi}] did not converge (error estimate {error:e} after {subdivisions} subdivisions)")]
    QuadratureFailed {
        lo: f64,
        hi: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("finite-difference integrand {value:e} below tolerance at u = {at}")]
    NegativeIntegrand { at: f64, value: f64 },

    #[error("tail of the drawdown integral not damped before u = {reached}")]
    TruncationNotConverged { reached: f64 },

    #[error("density series diverged after {diagonals} diagonals: {reason}")]
    SeriesDiverged { diagonals: usize, reason: String },

    #[error("transform evaluator returned a non-finite value at lambda = {re} + {im}i")]
    EvaluatorFailed { re: f64, im: f64 },

    #[error("path {path} left the state interval at t = {t}")]
    StateLeftInterval { path: usize, t: f64 },

    #[error("start density integrates to {mass}, expected 1")]
    DensityNotNormalized { mass: f64 },

    #[error("not supported: {0}")]
    NotSupported(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl DdError {
    /// Stable identifier printed by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            DdError::InvalidInput(_) => "InvalidInput",
            DdError::NonFiniteCoefficient { .. } => "NonFiniteCoefficient",
            DdError::SolveDiverged(_) => "SolveDiverged",
            DdError::QuadratureFailed { .. } => "QuadratureFailed",
            DdError::NegativeIntegrand { .. } => "NegativeIntegrand",
            DdError::TruncationNotConverged { .. } => "TruncationNotConverged",
            DdError::SeriesDiverged { .. } => "SeriesDiverged",
            DdError::EvaluatorFailed { .. } => "EvaluatorFailed",
            DdError::StateLeftInterval { .. } => "StateLeftInterval",
            DdError::DensityNotNormalized { .. } => "DensityNotNormalized",
            DdError::NotSupported(_) => "NotSupported",
            DdError::Io(_) => "Io",
        }
    }

    /// True for errors caused by the caller's inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            DdError::InvalidInput(_)
                | DdError::NotSupported(_)
                | DdError::DensityNotNormalized { .. }
                | DdError::Io(_)
        )
    }
}

impl From<std::io::Error> for DdError {
    fn from(e: std::io::Error) -> Self {
        DdError::Io(e.to_string())
    }
}

impl From<csv::Error> for DdError {
    fn from(e: csv::Error) -> Self {
        DdError::Io(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DdError::InvalidInput(msg.into()))
}

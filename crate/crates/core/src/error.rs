use thiserror::Error;

/// Every failure the workbench can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("flow step blew up at t = {t} (|x| or |xi| above overflow guard)")]
    StepBlowup { t: f64 },

    #[error("{what}: measured {measured:.3e} exceeds tolerance {tol:.3e}")]
    ToleranceExceeded { what: String, measured: f64, tol: f64 },

    #[error("trajectory undetermined at horizon {horizon}: |x| = {radius} lies in the (R/2, R] band")]
    Undetermined { horizon: f64, radius: f64 },

    #[error("energy shell is empty: {0}")]
    EmptyShell(String),

    #[error("grid does not resolve the oscillation: k_max * dx = {product:.3} > {limit:.3}")]
    ResolutionError { product: f64, limit: f64 },

    #[error("singular system: zero pivot in column {column}")]
    SingularSystem { column: usize },

    #[error("Lanczos did not converge after {iterations} iterations (last relative change {last_change:.2e})")]
    PowerIterationStall { iterations: usize, last_change: f64 },

    #[error("precondition violated: {what} (offending value {value:.3e})")]
    PreconditionViolated { what: String, value: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("grid convergence gate failed at h = {h}: relative change {change:.3e} > {tol:.3e}")]
    ConvergenceGateFailed { h: f64, change: f64, tol: f64 },

    #[error("diagonalization failed: {0}")]
    DiagonalizationFailed(String),

    #[error("integrand at T = {t} is {value:.3e}, above tail threshold {threshold:.1e}")]
    TailNotNegligible { t: f64, value: f64, threshold: f64 },

    #[error("channel truncation bound e^(-Im z L) = {bound:.3e} exceeds tolerance {tol:.1e}")]
    TruncationError { bound: f64, tol: f64 },

    #[error("transport front reaches the channel end: t/h = {travel} >= {limit}")]
    FrontReachedBoundary { travel: f64, limit: f64 },

    #[error("symbol does not decay in xi: tail {tail:.3e} vs peak {peak:.3e}")]
    SymbolDecayError { tail: f64, peak: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("gate `{gate}` failed: measured {measured}")]
    GateFailure { gate: String, measured: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub fn precondition(what: impl Into<String>, value: f64) -> Self {
        Error::PreconditionViolated { what: what.into(), value }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

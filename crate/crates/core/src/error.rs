use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no threshold root on [1, {t}]: equation has no sign change")]
    InfeasibleThreshold { t: f64 },

    #[error("Lévy tail is infinite at epsilon = {0}; a positive truncation level is required")]
    TruncationRequired(f64),

    #[error("stop tolerance {0} must lie in (0, 1)")]
    DegenerateStop(f64),

    #[error("path has no jumps")]
    EmptyPath,

    #[error("frequencies are not summable for beta = {0} (need beta > 1)")]
    NonSummable(f64),

    #[error("expected overflow {expected:.4} balls exceeds budget {budget}")]
    OverflowBudget { expected: f64, budget: f64 },

    #[error("integrator is not supported: {0}")]
    UnsupportedIntegrator(String),

    #[error("saddle window could not be widened far enough (A = {upper:.2}, a = {lower:.3e}, tail bound {tail_bound:.3e})")]
    WindowExhausted {
        lower: f64,
        upper: f64,
        tail_bound: f64,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

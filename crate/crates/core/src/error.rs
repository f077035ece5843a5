use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, inadmissible parameters, mismatched shapes.
    #[error("validation: {0}")]
    Validation(String),
    /// The grid cannot resolve what was asked of it.
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("no convergence in {what} after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("blow-up detected at t = {time}: max |u| = {max_amplitude:.3e}")]
    BlowUp { time: f64, max_amplitude: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::BlowUp { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err($crate::Error::Validation(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;

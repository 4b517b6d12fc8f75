use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("box {0} lies outside the simulated window")]
    OutsideWindow(String),

    #[error("expected jump count {expected:.3e} exceeds the guard {guard:.3e}")]
    TooManyJumps { expected: f64, guard: f64 },

    #[error("compensator band ({lower}, {upper}] diverges for alpha = {alpha}")]
    DivergentBand { alpha: f64, lower: f64, upper: f64 },

    #[error("predictability violation: integrand evaluated at s = {at} read jumps up to t = {requested}")]
    Predictability { at: f64, requested: f64 },

    #[error("I_alpha is infinite for {kernel} with alpha = {alpha}")]
    InfiniteIntegrability { kernel: String, alpha: f64 },

    #[error("Picard iteration diverged after {iterations} iterations (U_n = {increments:?})")]
    Diverged { iterations: usize, increments: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

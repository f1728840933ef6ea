use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not an ellipse: {0}")]
    NotAnEllipse(String),
    #[error("not an ellipsoid: {0}")]
    NotAnEllipsoid(String),
    #[error("object is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        /// Barycentric weights at the last iterate.
        weights: Vec<f64>,
    },
    #[error("ill-conditioned system: singular values {sigma_min:e} / {sigma_next:e} / {sigma_max:e}")]
    IllConditioned {
        sigma_min: f64,
        sigma_next: f64,
        sigma_max: f64,
    },
    #[error("scene generation failed for {image_id} after {attempts} attempts: {reason}")]
    SceneGenerationFailed {
        image_id: String,
        attempts: usize,
        reason: String,
    },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

use thiserror::Error;

/// Errors produced by the model, solver, estimators and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mass matrix is numerically singular (condition estimate {0:.3e})")]
    SingularMassMatrix(f64),
    #[error("massless environment has no dynamics of its own")]
    MasslessEnvironment,
    #[error("augmented jacobian is singular (condition estimate {0:.3e})")]
    KinematicSingularity(f64),
    #[error("grasp constraint drifted by {0:.3e} m")]
    ConstraintDrift(f64),
    #[error("profile infeasible: speed {speed} cannot be braked within {remaining} m")]
    InfeasibleProfile { speed: f64, remaining: f64 },
    #[error("degenerate door geometry: {0}")]
    DegenerateGeometry(String),
    #[error("solver diverged at iteration {iteration}: non-finite rollout")]
    Divergence { iteration: usize },
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("episode '{episode}' failed at t = {time:.3} s: {source}")]
    Episode {
        episode: String,
        time: f64,
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("log format error: {0}")]
    LogFormat(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid dimension {dim} for `{problem}`: {reason}")]
    InvalidDimension {
        problem: String,
        dim: usize,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The sketch produced a numerically singular system; the caller should
    /// draw a fresh sketch.
    #[error("degenerate sketch: {0}")]
    DegenerateSketch(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("step norm vanished at iteration {0}")]
    Stagnation(usize),

    #[error("run aborted at iteration {iteration}: {reason}")]
    RunAborted { iteration: usize, reason: String },

    #[error("`{0}` has no least-squares structure")]
    NotLeastSquares(String),

    #[error("diagnostic objective values were not recorded")]
    DiagnosticsMissing,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

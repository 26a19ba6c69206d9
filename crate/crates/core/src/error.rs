use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("eigensolver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Wilson-loop overlap {min_overlap:.3e} below 0.5 at corner c{corner}; refine the theta grid")]
    GridRefinement { corner: usize, min_overlap: f64 },

    #[error("gap closure: {0}")]
    GapClosure(String),

    #[error("winding of corner c{corner} is {winding:.4}, residual {residual:.3} exceeds 0.05")]
    WindingResidual {
        corner: usize,
        winding: f64,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("wall-clock budget of {0} s exceeded")]
    Budget(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Domain(_) | Error::Json(_) => 2,
            Error::Budget(_) => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

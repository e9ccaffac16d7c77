use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design not supported here: {0}")]
    InvalidDesign(String),

    #[error("oracle lambda requires the true matrix A0")]
    MissingOracle,

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("solver diverged at iteration {iteration}: objective is not finite")]
    Divergence { iteration: usize },

    #[error("packing shortfall: reached {achieved} of {target} elements after {attempts} draws")]
    PackingShortfall {
        achieved: usize,
        target: usize,
        attempts: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for failures of the numerical machinery itself (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNoConvergence { .. } | Error::Divergence { .. } | Error::NonFinite(_)
        )
    }
}

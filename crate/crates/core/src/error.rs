use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("atom position {0} lies outside [0, 1]")]
    PositionOutOfDomain(f64),

    #[error("non-finite atom data (position {position}, weight {weight})")]
    NonFiniteAtom { position: f64, weight: f64 },

    #[error("map sent {input} to {output}, outside [0, 1]")]
    MapOutOfRange { input: f64, output: f64 },

    #[error("velocity evaluated to a non-finite value at x = {0}")]
    NonFiniteVelocity(f64),

    #[error("gating function evaluated to a non-finite value at x = {0}")]
    NonFiniteGating(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program did not converge within {0} pivots")]
    LpNotConverged(usize),

    #[error("incompatible trajectories: {0}")]
    IncompatibleTrajectories(String),

    #[error("test function rejected: {0}")]
    InvalidTestFunction(String),

    #[error("bad spec at {location}: {message}")]
    BadSpec { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn bad_spec(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::BadSpec {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Configuration and input problems, as opposed to failures of the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::BadSpec { .. }
                | Error::InvalidParameter(_)
                | Error::PositionOutOfDomain(_)
                | Error::NonFiniteAtom { .. }
                | Error::InvalidTestFunction(_)
                | Error::Io(_)
        )
    }
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure at {point:?}: {reason}")]
    Numerical { reason: String, point: Vec<f64> },

    #[error("connectivity: {0}")]
    Connectivity(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numerical(reason: impl Into<String>, point: &[f64]) -> Self {
        Error::Numerical {
            reason: reason.into(),
            point: point.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

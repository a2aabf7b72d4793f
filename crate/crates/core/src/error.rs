use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside [{}, {}]", range.0, range.1)]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: (f64, f64),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-finite state at step {step} (t = {time} s), vehicle {vehicle}: {quantity}")]
    NonFinite {
        step: usize,
        time: f64,
        vehicle: usize,
        quantity: &'static str,
    },

    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

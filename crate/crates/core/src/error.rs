use std::fmt;

/// Errors raised by the library.
///
/// Infeasible controller output is a [`Error::Invariant`]; bad user input is
/// a [`Error::Validation`]. The CLI maps these onto distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("Markov chain is reducible: {0}")]
    Reducible(String),

    #[error("Markov chain is periodic with period {0}; no limiting distribution")]
    Periodic(usize),

    #[error("invariant violated at slot {slot}: {message}")]
    Invariant { slot: usize, message: String },

    #[error("internal solver fault: {0}")]
    Solver(String),

    #[error("cost target {target} unreachable (best {best} at e_max = {e_max} MWh)")]
    Unreachable { target: f64, best: f64, e_max: f64 },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn invariant(slot: usize, message: impl fmt::Display) -> Self {
        Error::Invariant {
            slot,
            message: message.to_string(),
        }
    }
}

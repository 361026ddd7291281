use std::io;

use thiserror::Error;

use crate::country::CountryCode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{source_name}:{line}: {message}")]
    Table {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("funder {0:?} is missing from the resolution table")]
    MissingFunder(String),

    #[error("country {0} is not an author country of the publication")]
    NotAnAuthor(CountryCode),

    #[error("counterfactual profile has mass on {0:?} where the actual profile has none")]
    SupportViolation(String),

    #[error("profiles are defined over different discipline sets")]
    DisciplineMismatch,
}

impl Error {
    pub(crate) fn table(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Table {
            source_name: source_name.to_owned(),
            line,
            message: message.into(),
        }
    }
}

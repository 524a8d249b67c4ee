//! Failures mapped onto the process exit-code contract.

use thiserror::Error;

/// Exit codes: 0 success or pass, 1 obstruction found, 2 input error, 3 numeric failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_OBSTRUCTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

impl From<geoflow::Error> for CliError {
    fn from(e: geoflow::Error) -> Self {
        use geoflow::Error as E;
        match e {
            E::Parse(_) | E::Validation(_) | E::Argument(_) | E::NotApplicable(_) | E::Domain { .. } => {
                CliError::Input(e.to_string())
            }
            E::Numeric(_) | E::Integration { .. } | E::Estimator { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

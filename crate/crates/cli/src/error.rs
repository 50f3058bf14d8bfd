use plap_core::PlapError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, schema violation or unusable input file.
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] PlapError),
}

impl CliError {
    /// Exit status: 1 for input errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Core(e) => {
                if is_input_error(e) {
                    1
                } else {
                    2
                }
            }
        }
    }
}

pub fn is_input_error(e: &PlapError) -> bool {
    matches!(e, PlapError::InvalidInput(_) | PlapError::EnvelopeViolation { .. })
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv: {e}"))
    }
}

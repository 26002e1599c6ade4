use conflux_core::Error;
use thiserror::Error as ThisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn is_validation(&self) -> bool {
        match self {
            CliError::Validation(_) => true,
            CliError::Core(e) => matches!(
                e,
                Error::Dimension(_)
                    | Error::StepMismatch(..)
                    | Error::Resonant(_)
                    | Error::NonProper(..)
                    | Error::StripHypothesis(..)
                    | Error::Invalid(_)
            ),
            CliError::Io(_) => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            e if e.is_validation() => "validation",
            _ => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_NUMERIC
        }
    }
}

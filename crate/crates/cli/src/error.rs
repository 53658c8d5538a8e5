use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("chains did not converge: {0}")]
    Unconverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Unconverged(_) => 3,
        }
    }
}

impl From<brl::Error> for CliError {
    fn from(e: brl::Error) -> Self {
        use brl::Error::*;
        match e {
            TooFewChains(_) | InvalidArgument(_) | ThresholdsNotIncreasing | ItemParse(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub fn io_error(path: &str, e: std::io::Error) -> CliError {
    CliError::Data(format!("{path}: {e}"))
}

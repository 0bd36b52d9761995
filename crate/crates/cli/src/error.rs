use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad plan, flag combination or input file.
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] finpop_lstat::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use finpop_lstat::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(E::Parse(_) | E::Io(_)) => 2,
            CliError::Core(E::Resource(_)) => 3,
            CliError::Core(E::Domain(_)) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

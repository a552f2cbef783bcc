use std::fmt;

pub const EXIT_DATA: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// An error carrying the process exit code it should produce.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<neuroprint::Error> for CliError {
    fn from(e: neuroprint::Error) -> Self {
        // a bad channel name on the command line is a parameter problem
        let config = e.is_config_error() || matches!(e, neuroprint::Error::UnknownChannel(_));
        CliError {
            code: if config { EXIT_CONFIG } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::fmt;

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input data; exit 2.
    Input(String),
    /// A series, quadrature or optimizer did not converge; exit 3.
    Numerical(String),
    /// The quasi-unbiased system is too ill-conditioned to solve; exit 4.
    IllConditioned(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::IllConditioned(_) => 4,
        }
    }

    /// Same error with `context` prepended to its message.
    pub fn context(self, context: impl fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{context}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
            CliError::IllConditioned(m) => CliError::IllConditioned(format!("{context}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::IllConditioned(m) => write!(f, "ill-conditioned: {m}"),
        }
    }
}

impl From<homvol::Error> for CliError {
    fn from(e: homvol::Error) -> Self {
        match e {
            homvol::Error::Domain(_) => CliError::Input(e.to_string()),
            homvol::Error::IllConditioned { .. } => CliError::IllConditioned(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

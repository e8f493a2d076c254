use lightcone_core::Error;

/// Failure of a CLI run; [`CliError::exit_code`] gives the process status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Numeric(Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } | CliError::Format(_) => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

fn is_numeric(e: &Error) -> bool {
    match e {
        Error::BlowUp { .. }
        | Error::TangentBlowUp { .. }
        | Error::LambdaTooLarge { .. }
        | Error::EnergyOverflow
        | Error::ForceOverflow { .. }
        | Error::NonFiniteState { .. }
        | Error::BracketBound { .. } => true,
        Error::Truncation { source, .. } => is_numeric(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_numeric(&e) {
            CliError::Numeric(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

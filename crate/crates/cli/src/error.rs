use std::fmt;

use qgeom_core::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    GapClosure(String),
    Tolerance(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Config(_) => 2,
            CliError::GapClosure(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::GapClosure(m) => write!(f, "gap closure: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance violation: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::GapClosure { .. } => CliError::GapClosure(e.to_string()),
            Error::GapClosureOnGrid { ref points } => CliError::GapClosure(format!(
                "{} gapless grid point(s), first at {:?}",
                points.len(),
                points.first().unwrap_or(&Vec::new())
            )),
            Error::InvalidDimension { .. }
            | Error::DimensionMismatch { .. }
            | Error::MissingJacobian
            | Error::InvalidDrive(_)
            | Error::InvalidModel(_)
            | Error::WindowTooNarrow { .. }
            | Error::UndersampledWindow { .. }
            | Error::Unsupported(_) => CliError::Config(e.to_string()),
            Error::GaugeFixFailure { .. } | Error::SingularMetric { .. } => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

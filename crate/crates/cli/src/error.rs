use std::process::ExitCode;

use tilted_core::bell::BellError;
use tilted_core::npa::NpaError;
use tilted_core::qsim::QsimError;
use tilted_core::sos::SosError;
use tilted_core::swap::SwapError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad parameters or configuration.
    #[error("{0}")]
    Invalid(String),
    /// A computation that did not succeed (non-optimal solve, failed check).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Invalid(_) => ExitCode::from(2),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

impl From<BellError> for CliError {
    fn from(e: BellError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SwapError> for CliError {
    fn from(e: SwapError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<QsimError> for CliError {
    fn from(e: QsimError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SosError> for CliError {
    fn from(e: SosError) -> Self {
        match e {
            SosError::Parameters(_) | SosError::IrrationalBound { .. } => CliError::Invalid(e.to_string()),
            SosError::Sdp(_) | SosError::NotOptimal(_) => CliError::Failed(e.to_string()),
        }
    }
}

impl From<NpaError> for CliError {
    fn from(e: NpaError) -> Self {
        match e {
            NpaError::Sdp(_) | NpaError::NotOptimal { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("I/O error: {e}"))
    }
}

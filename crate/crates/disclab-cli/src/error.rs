use disclab::logderiv::LogDerivError;
use disclab::ode::OdeError;
use disclab::profile::ProfileError;
use disclab::riesz::RieszError;
use disclab::scaffold::ScaffoldError;
use disclab::wiman::WimanError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct E<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&E {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<ScaffoldError> for CliError {
    fn from(e: ScaffoldError) -> Self {
        match e {
            ScaffoldError::Params(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RieszError> for CliError {
    fn from(e: RieszError) -> Self {
        match e {
            RieszError::Numerics(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<WimanError> for CliError {
    fn from(e: WimanError) -> Self {
        match e {
            WimanError::Invalid(_) | WimanError::Feq4 { .. } | WimanError::DeltaSmall { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LogDerivError> for CliError {
    fn from(e: LogDerivError) -> Self {
        match e {
            LogDerivError::Invalid(_) => CliError::Validation(e.to_string()),
            LogDerivError::Numerics(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::Invalid(_) | OdeError::Profile(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<disclab::numerics::NumericsError> for CliError {
    fn from(e: disclab::numerics::NumericsError) -> Self {
        use disclab::numerics::NumericsError as N;
        match e {
            N::InvalidRadius(_) | N::InvalidGap(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

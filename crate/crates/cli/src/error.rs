use std::fmt;

use belief_client::api::ErrorKind;
use belief_client::ClientError;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Oracle(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Oracle(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Oracle(m) | CliError::Infeasible(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        let message = e.to_string();
        match e {
            ClientError::Api { kind: ErrorKind::Input | ErrorKind::NotFound, .. } => CliError::Input(message),
            ClientError::Api { kind: ErrorKind::Oracle, .. } => CliError::Oracle(message),
            ClientError::Api { kind: ErrorKind::Infeasible, .. } => CliError::Infeasible(message),
            _ => CliError::Internal(message),
        }
    }
}

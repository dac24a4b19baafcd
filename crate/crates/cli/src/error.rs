use std::process::ExitCode;

use spikesim::ann::AnnError;
use spikesim::convert::ConvertError;
use spikesim::mnist::IdxError;
use spikesim::neuron::NeuronError;
use spikesim::sim::SimError;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        })
    }
}

impl From<IdxError> for CliError {
    fn from(e: IdxError) -> Self {
        match e {
            IdxError::EmptySubset | IdxError::CountTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<AnnError> for CliError {
    fn from(e: AnnError) -> Self {
        match e {
            AnnError::Io { .. } | AnnError::Schema(_) => CliError::Io(e.to_string()),
            AnnError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ConvertError> for CliError {
    fn from(e: ConvertError) -> Self {
        match e {
            ConvertError::Ann(inner) => inner.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NeuronError> for CliError {
    fn from(e: NeuronError) -> Self {
        match e {
            NeuronError::Io { .. } | NeuronError::Curve { .. } => CliError::Io(e.to_string()),
            NeuronError::DegenerateBase | NeuronError::OutOfRange { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => CliError::Io(e.to_string()),
            SimError::Neuron(inner) => inner.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

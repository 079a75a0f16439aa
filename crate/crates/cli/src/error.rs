use l2dcd::data::DataError;
use l2dcd::defer::DeferError;
use l2dcd::experts::ExpertError;
use l2dcd::features::FeatureError;
use l2dcd::{EvalError, GraphError};
use thiserror::Error;

/// Every failure the binary reports, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("remote service: {0}")]
    Remote(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Remote(_) => 4,
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Failure(format!("{context}: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExpertError> for CliError {
    fn from(e: ExpertError) -> Self {
        match e {
            ExpertError::OutOfRange(_)
            | ExpertError::WrongCardinality(_)
            | ExpertError::InvalidProbability(_)
            | ExpertError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            ExpertError::EmptyDescription => CliError::Data(e.to_string()),
            ExpertError::Unparseable(_)
            | ExpertError::Ambiguous(_)
            | ExpertError::AuthMissing
            | ExpertError::Transport(_)
            | ExpertError::Cache(_) => CliError::Remote(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            FeatureError::NonFinite
            | FeatureError::AuthMissing
            | FeatureError::Transport(_)
            | FeatureError::Cache(_) => CliError::Remote(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DeferError> for CliError {
    fn from(e: DeferError) -> Self {
        match e {
            DeferError::Expert(e) => e.into(),
            DeferError::Feature(e) => e.into(),
            DeferError::InvalidHyperparams(_) | DeferError::InvalidProbability(_) => CliError::Usage(e.to_string()),
            DeferError::UnsupportedVersion(_) | DeferError::Json(_) => CliError::Failure(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Expert(e) => e.into(),
            EvalError::Defer(e) => e.into(),
            EvalError::Empty | EvalError::EmptyGrid | EvalError::SeedMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Defer(e) => e.into(),
            GraphError::Feature(e) => e.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

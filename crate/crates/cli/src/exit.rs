use reward_forge::curation::CurationError;
use reward_forge::dataset::DatasetError;
use reward_forge::evaluation::EvalError;
use reward_forge::model::ModelError;
use reward_forge::mpo::MpoError;
use reward_forge::training::TrainError;

pub const USAGE: u8 = 2;
pub const ENVIRONMENT: u8 = 1;

/// An error paired with the process exit code it maps to: 2 for invalid
/// input or configuration, 1 for IO and client failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self { code: USAGE, error: error.into() }
    }

    pub fn env(error: impl Into<anyhow::Error>) -> Self {
        Self { code: ENVIRONMENT, error: error.into() }
    }
}

pub trait Classify<T> {
    fn invalid(self) -> CliResult<T>;
    fn env(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CliResult<T> {
        self.map_err(CliError::invalid)
    }

    fn env(self) -> CliResult<T> {
        self.map_err(CliError::env)
    }
}

fn model_is_validation(e: &ModelError) -> bool {
    match e {
        ModelError::Io { .. } => false,
        ModelError::Features(d) => d.is_validation(),
        _ => true,
    }
}

macro_rules! classified {
    ($($ty:ty => $pred:expr),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let validation: fn(&$ty) -> bool = $pred;
                if validation(&e) { CliError::invalid(e) } else { CliError::env(e) }
            }
        }
    )*};
}

classified! {
    DatasetError => DatasetError::is_validation,
    CurationError => CurationError::is_validation,
    TrainError => TrainError::is_validation,
    EvalError => EvalError::is_validation,
    MpoError => MpoError::is_validation,
    ModelError => model_is_validation,
}

//! Command-line orchestration: run configuration, experiment phases and
//! the `ironia` subcommands.

mod commands;
mod config;
mod phase;

use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::corpus::CorpusError;
use crate::encoder::EncoderError;
use crate::llm::LlmError;
use crate::review::ReviewError;

pub use commands::{run, Cli, Command};
pub use config::{
    validate_config, ClientKind, DataConfig, EncoderConfig, LlmConfig, Phase, RunConfig, SplitConfig,
    AUGMENTED_MAX_ENCODERS,
};
pub use phase::{
    embed_examples, file_stem, phase_dataset, run_phase, run_phase_with, score_machine_tags, train_and_evaluate,
    PhaseOutput,
};

/// Errors grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::RatioError(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        match e {
            EncoderError::UnknownEncoder(_) => CliError::Config(e.to_string()),
            EncoderError::EmptyText | EncoderError::Format(_) => CliError::Data(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Config(_) | LlmError::Template(_) => CliError::Config(e.to_string()),
            LlmError::Transient(_) | LlmError::Backend(_) => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

//! Prompt templates, LLM clients and the response grammar.

mod batch;
mod client;
mod parse;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{annotate_batch, enhance_batch, Annotation, BatchOutcome, BatchPolicy, Enhancement, Failure};
pub use client::{
    CompletionRequest, FixtureLine, LlmClient, MockClient, MockFallback, RemoteClient, Subject, CLASSIFICATION_WORD_CAP,
};
pub use parse::{format_classification_response, parse_classification_response, word_count, ParsedResponse};
pub use template::{
    render_classification_prompt, render_enhancement_prompt, Language, PromptTemplate, TemplateKind, PLACEHOLDER,
};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("entry text is empty")]
    EmptyText,
    #[error("invalid template: {0}")]
    Template(String),
    #[error("no recognizable leading tag in response: {0:?}")]
    TagParse(String),
    #[error("no asterisk-delimited explanation in response: {0:?}")]
    ExplanationParse(String),
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("no mock fixture for entry '{0}'")]
    NoFixture(String),
    #[error("entry '{0}' has no label")]
    Unlabeled(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LlmError {
    pub fn kind(&self) -> FailureKind {
        match self {
            LlmError::EmptyText => FailureKind::EmptyText,
            LlmError::TagParse(_) => FailureKind::TagParseError,
            LlmError::ExplanationParse(_) => FailureKind::ExplanationParseError,
            LlmError::EmptyCompletion => FailureKind::EmptyCompletion,
            LlmError::Transient(_) => FailureKind::Unreachable,
            LlmError::NoFixture(_) => FailureKind::NoFixture,
            _ => FailureKind::Backend,
        }
    }

    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transient(_))
    }
}

/// Per-entry failure category recorded by batch operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    EmptyText,
    TagParseError,
    ExplanationParseError,
    EmptyCompletion,
    Unreachable,
    NoFixture,
    Backend,
}

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::corpus::Entry;

pub const PLACEHOLDER: &str = "{{TEXT}}";

const CLASSIFICATION_ES: &str = include_str!("../../prompts/classification_es.txt");
const CLASSIFICATION_EN: &str = include_str!("../../prompts/classification_en.txt");
const ENHANCEMENT_ES: &str = include_str!("../../prompts/enhancement_es.txt");
const ENHANCEMENT_EN: &str = include_str!("../../prompts/enhancement_en.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Classification,
    Enhancement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    Es,
    En,
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "es" | "spanish" => Ok(Language::Es),
            "en" | "english" => Ok(Language::En),
            other => Err(format!("unknown prompt language '{other}'")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::Es => "es",
            Language::En => "en",
        })
    }
}

/// A prompt body with exactly one `{{TEXT}}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: TemplateKind,
    language: Language,
    body: String,
}

impl PromptTemplate {
    /// Validates and wraps a template body.
    ///
    /// Classification bodies are blank-line separated blocks: context, the
    /// three contradiction scenarios (as `- ` bullets), the three exceptions
    /// (as `- ` bullets), the task and output format, and finally the block
    /// holding the placeholder.
    pub fn new(kind: TemplateKind, language: Language, body: impl Into<String>) -> Result<Self, LlmError> {
        let body = body.into().replace("\r\n", "\n");
        let found = body.matches(PLACEHOLDER).count();
        if found != 1 {
            return Err(LlmError::Template(format!("expected exactly one {PLACEHOLDER} placeholder, found {found}")));
        }
        if kind == TemplateKind::Classification {
            let blocks = blocks(&body);
            if blocks.len() != 5 {
                return Err(LlmError::Template(format!(
                    "classification template needs 5 blocks (context, scenarios, exceptions, task, text), found {}",
                    blocks.len()
                )));
            }
            for (name, block) in [("scenario", blocks[1]), ("exception", blocks[2])] {
                let n = bullets(block).count();
                if n != 3 {
                    return Err(LlmError::Template(format!("expected 3 {name} bullets, found {n}")));
                }
            }
            if !blocks[4].contains(PLACEHOLDER) {
                return Err(LlmError::Template("placeholder must be in the final block".into()));
            }
        }
        Ok(PromptTemplate { kind, language, body })
    }

    pub fn from_file(kind: TemplateKind, language: Language, path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let body = std::fs::read_to_string(path.as_ref())
            .map_err(|e| LlmError::Template(format!("{}: {e}", path.as_ref().display())))?;
        Self::new(kind, language, body)
    }

    /// The bundled template for `kind` in `language`.
    pub fn builtin(kind: TemplateKind, language: Language) -> Self {
        let body = match (kind, language) {
            (TemplateKind::Classification, Language::Es) => CLASSIFICATION_ES,
            (TemplateKind::Classification, Language::En) => CLASSIFICATION_EN,
            (TemplateKind::Enhancement, Language::Es) => ENHANCEMENT_ES,
            (TemplateKind::Enhancement, Language::En) => ENHANCEMENT_EN,
        };
        Self::new(kind, language, body).expect("bundled templates are valid")
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Contradiction scenarios (classification templates only).
    pub fn scenarios(&self) -> Vec<&str> {
        self.bullet_block(1)
    }

    /// Exceptions that must not be tagged as irony (classification templates only).
    pub fn exceptions(&self) -> Vec<&str> {
        self.bullet_block(2)
    }

    fn bullet_block(&self, i: usize) -> Vec<&str> {
        match self.kind {
            TemplateKind::Classification => blocks(&self.body).get(i).map(|b| bullets(b).collect()).unwrap_or_default(),
            TemplateKind::Enhancement => Vec::new(),
        }
    }

    /// Substitutes the entry text (trailing newline of the template dropped).
    pub fn render(&self, text: &str) -> Result<String, LlmError> {
        if text.trim().is_empty() {
            return Err(LlmError::EmptyText);
        }
        let (head, tail) = self.body.split_once(PLACEHOLDER).expect("validated");
        let mut out = String::with_capacity(self.body.len() + text.len());
        out.push_str(head);
        out.push_str(text);
        out.push_str(tail.trim_end_matches('\n'));
        Ok(out)
    }
}

fn blocks(body: &str) -> Vec<&str> {
    body.split("\n\n").map(str::trim).filter(|b| !b.is_empty()).collect()
}

fn bullets(block: &str) -> impl Iterator<Item = &str> {
    block.lines().filter_map(|l| l.trim_start().strip_prefix("- "))
}

pub fn render_classification_prompt(entry: &Entry, language: Language) -> Result<String, LlmError> {
    PromptTemplate::builtin(TemplateKind::Classification, language).render(&entry.text)
}

pub fn render_enhancement_prompt(entry: &Entry, language: Language) -> Result<String, LlmError> {
    PromptTemplate::builtin(TemplateKind::Enhancement, language).render(&entry.text)
}

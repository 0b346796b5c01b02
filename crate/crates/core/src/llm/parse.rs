use std::sync::LazyLock;

use regex::Regex;

use super::LlmError;
use crate::corpus::{Label, Mode};

// Leading tag in straight or typographic single quotes, optional leading whitespace.
static TAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*['\u{2018}\u{2019}\u{201A}\u{2032}]\s*([^'\u{2018}\u{2019}\u{2032}\n]{1,32}?)\s*['\u{2018}\u{2019}\u{2032}]").unwrap());
static EXPLANATION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*([^*]*)\*").unwrap());

/// A parsed model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub tag: Label,
    pub explanation: String,
}

/// Extracts the quoted leading tag and the first asterisk-delimited
/// explanation from a classification response.
///
/// English and Spanish tag spellings normalize to the same multiclass label.
pub fn parse_classification_response(raw: &str) -> Result<ParsedResponse, LlmError> {
    let caps = TAG_RE.captures(raw).ok_or_else(|| LlmError::TagParse(snippet(raw)))?;
    let token = caps.get(1).expect("group 1").as_str();
    let tag = Label::parse_lenient(token)
        .filter(|l| l.belongs_to(Mode::Multiclass))
        .ok_or_else(|| LlmError::TagParse(token.to_string()))?;
    let rest = &raw[caps.get(0).expect("group 0").end()..];
    let explanation = EXPLANATION_RE
        .captures(rest)
        .map(|c| c.get(1).expect("group 1").as_str())
        .filter(|e| !e.trim().is_empty())
        .ok_or_else(|| LlmError::ExplanationParse(snippet(rest)))?;
    Ok(ParsedResponse { tag, explanation: explanation.to_string() })
}

/// Formats a response in the grammar the classification prompt requests.
pub fn format_classification_response(tag: Label, explanation: &str) -> String {
    format!("'{}' *{}*", tag.as_str(), explanation)
}

/// Whitespace-token count, used for the 500-word response cap.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn snippet(s: &str) -> String {
    let s = s.trim();
    match s.char_indices().nth(60) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}

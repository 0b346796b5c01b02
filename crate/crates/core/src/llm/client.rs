use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::LlmError;
use crate::util::text_key;

/// Word cap stated in the classification prompt.
pub const CLASSIFICATION_WORD_CAP: usize = 500;

/// What the prompt is about; lets fixture-backed clients look responses up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subject {
    pub entry_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_output_words: usize,
    pub subject: Option<Subject>,
}

impl CompletionRequest {
    /// Deterministic single-completion request.
    pub fn new(prompt: String) -> Self {
        CompletionRequest { prompt, temperature: 0.0, max_output_words: CLASSIFICATION_WORD_CAP, subject: None }
    }

    pub fn with_subject(mut self, entry_id: &str, text: &str) -> Self {
        self.subject = Some(Subject { entry_id: entry_id.to_string(), text: text.to_string() });
        self
    }
}

/// A text-completion backend.
pub trait LlmClient: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError>;

    fn model_id(&self) -> &str;
}

/// What a [`MockClient`] answers when no fixture matches.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MockFallback {
    #[default]
    Fail,
    /// Echo the subject text back (an identity "enhancer").
    Identity,
    Constant(String),
}

/// Pure fixture-table client. Looks up the subject's entry id first, then the
/// `fnv:` key of its text.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    responses: HashMap<String, String>,
    fallback: MockFallback,
    model_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureLine {
    pub key: String,
    pub response: String,
}

impl MockClient {
    pub fn new() -> Self {
        MockClient { model_id: "mock".into(), ..Default::default() }
    }

    pub fn identity() -> Self {
        Self::new().with_fallback(MockFallback::Identity)
    }

    pub fn with_fallback(mut self, fallback: MockFallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn with_response(mut self, key: impl Into<String>, response: impl Into<String>) -> Self {
        self.responses.insert(key.into(), response.into());
        self
    }

    /// Loads a JSONL fixture of `{"key": ..., "response": ...}` lines.
    pub fn from_fixture_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut client = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fx: FixtureLine = serde_json::from_str(&line)
                .map_err(|e| LlmError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            client.responses.insert(fx.key, fx.response);
        }
        Ok(client)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmClient for MockClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let subject = req.subject.as_ref();
        let hit = subject.and_then(|s| {
            self.responses.get(&s.entry_id).or_else(|| self.responses.get(&text_key(&s.text)))
        });
        if let Some(r) = hit {
            return Ok(r.clone());
        }
        match (&self.fallback, subject) {
            (MockFallback::Identity, Some(s)) => Ok(s.text.clone()),
            (MockFallback::Constant(c), _) => Ok(c.clone()),
            _ => Err(LlmError::NoFixture(subject.map(|s| s.entry_id.clone()).unwrap_or_default())),
        }
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct RemoteClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl RemoteClient {
    pub fn new(base_url: &str, model: &str, api_key: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteClient {
            agent,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
        }
    }

    /// Reads the credential from `api_key_env`; a missing variable is a config error.
    pub fn from_env(base_url: &str, model: &str, api_key_env: &str, timeout: Duration) -> Result<Self, LlmError> {
        let key = std::env::var(api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LlmError::Config(format!("credential variable {api_key_env} is not set")))?;
        Ok(Self::new(base_url, model, key, timeout))
    }
}

impl LlmClient for RemoteClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": req.prompt }],
            "temperature": req.temperature,
            "n": 1,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(LlmError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Backend(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse =
            resp.body_mut().read_json().map_err(|e| LlmError::Backend(format!("malformed completion: {e}")))?;
        Ok(parsed.choices.into_iter().next().and_then(|c| c.message.content).unwrap_or_default())
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

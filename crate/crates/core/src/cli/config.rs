use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::classifier::TrainingConfig;
use crate::corpus::{Mode, SplitRatios, DEFAULT_SPLIT_SEED};
use crate::encoder::{EncoderRegistry, Pooling};
use crate::llm::{BatchPolicy, Language, LlmClient, MockClient, MockFallback, RemoteClient};

/// Most encoders the augmented phase may compare.
pub const AUGMENTED_MAX_ENCODERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BaselineGpt,
    BaselineBert,
    Enhanced,
    Augmented,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::BaselineGpt => "baseline_gpt",
            Phase::BaselineBert => "baseline_bert",
            Phase::Enhanced => "enhanced",
            Phase::Augmented => "augmented",
        }
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline_gpt" => Ok(Phase::BaselineGpt),
            "baseline_bert" => Ok(Phase::BaselineBert),
            "enhanced" => Ok(Phase::Enhanced),
            "augmented" => Ok(Phase::Augmented),
            other => Err(format!("unknown phase '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Human-annotated corpus.
    pub primary: PathBuf,
    /// Corpus with LLM-expanded texts (enhanced phase).
    pub enhanced: Option<PathBuf>,
    /// Exported verified entries (augmented phase).
    pub verified: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        SplitConfig { train: r.train, val: r.val, test: r.test, seed: DEFAULT_SPLIT_SEED }
    }
}

impl SplitConfig {
    pub fn ratios(&self) -> SplitRatios {
        SplitRatios { train: self.train, val: self.val, test: self.test }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub pooling: Pooling,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub client: ClientKind,
    /// JSONL `{key, response}` fixture for the mock client.
    pub fixture: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub language: Language,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        let p = BatchPolicy::default();
        LlmConfig {
            client: ClientKind::Mock,
            fixture: None,
            base_url: None,
            model: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            language: p.language,
            retries: p.retries,
            backoff_ms: p.backoff.as_millis() as u64,
            max_in_flight: p.max_in_flight,
        }
    }
}

impl LlmConfig {
    pub fn policy(&self) -> BatchPolicy {
        BatchPolicy {
            retries: self.retries,
            backoff: Duration::from_millis(self.backoff_ms),
            max_in_flight: self.max_in_flight,
            language: self.language,
        }
    }

    /// Builds the configured client. Remote credentials come from the environment only.
    pub fn build_client(&self, fallback: MockFallback) -> Result<Box<dyn LlmClient>, CliError> {
        match self.client {
            ClientKind::Mock => {
                let client = match &self.fixture {
                    Some(path) => MockClient::from_fixture_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
                    None => MockClient::new(),
                };
                Ok(Box::new(client.with_fallback(fallback)))
            }
            ClientKind::Remote => {
                let (Some(base), Some(model)) = (&self.base_url, &self.model) else {
                    return Err(CliError::Config("remote client needs llm.base_url and llm.model".into()));
                };
                let client = RemoteClient::from_env(base, model, &self.api_key_env, Duration::from_secs(self.timeout_secs))
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Box::new(client))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub phase: Phase,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub encoders: Vec<String>,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    /// Train encoders on separate threads.
    #[serde(default)]
    pub parallel: bool,
}

fn default_mode() -> Mode {
    Mode::Multiclass
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.training.mode = cfg.mode;
        Ok(cfg)
    }

    /// Every constraint violation, in a stable order.
    pub fn violations(&self, registry: &EncoderRegistry) -> Vec<String> {
        let mut v = Vec::new();
        if self.phase == Phase::BaselineGpt {
            if self.llm.client == ClientKind::Mock && self.llm.fixture.is_none() {
                v.push("llm.fixture is required for the mock client".to_string());
            }
        } else if self.encoders.is_empty() {
            v.push(format!("phase {} needs at least one encoder", self.phase.as_str()));
        }
        for id in &self.encoders {
            if !registry.contains(id) {
                v.push(format!("unknown encoder '{id}'"));
            }
        }
        if self.phase == Phase::Augmented && self.encoders.len() > AUGMENTED_MAX_ENCODERS {
            v.push(format!(
                "phase augmented allows at most {AUGMENTED_MAX_ENCODERS} encoders, got {}",
                self.encoders.len()
            ));
        }
        if self.phase == Phase::Enhanced && self.data.enhanced.is_none() {
            v.push("phase enhanced needs data.enhanced".to_string());
        }
        if self.phase == Phase::Augmented && self.data.verified.is_none() {
            v.push("phase augmented needs data.verified".to_string());
        }
        if self.split.ratios().validate().is_err() {
            v.push(format!(
                "split ratios must be positive and sum to 1, got {}/{}/{}",
                self.split.train, self.split.val, self.split.test
            ));
        }
        if self.llm.client == ClientKind::Remote && (self.llm.base_url.is_none() || self.llm.model.is_none()) {
            v.push("remote client needs llm.base_url and llm.model".to_string());
        }
        if self.llm.max_in_flight == 0 {
            v.push("llm.max_in_flight must be >= 1".to_string());
        }
        v.extend(self.training.violations());
        v
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.data.primary);
        self.data.enhanced.as_mut().map(fix);
        self.data.verified.as_mut().map(fix);
        self.llm.fixture.as_mut().map(fix);
        self.encoder.cache_dir.as_mut().map(fix);
    }

    pub fn registry(&self) -> EncoderRegistry {
        let reg = EncoderRegistry::from_env();
        match &self.encoder.cache_dir {
            Some(dir) => reg.with_cache_dir(dir),
            None => reg,
        }
    }
}

/// Parses and checks a run configuration, reporting all violations together.
pub fn validate_config(path: impl AsRef<Path>) -> Result<RunConfig, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    let violations = cfg.violations(&cfg.registry());
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(violations.join("; ")))
    }
}

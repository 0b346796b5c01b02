//! 768-dimensional text embeddings from registered encoder checkpoints.
//!
//! The `stub` encoder is computed in-process. Every other encoder runs
//! through an [`EncoderBackend`]; the default one shells out to the command
//! in `IRONIA_EMBED_COMMAND` (see `scripts/hf_embed.py`), with checkpoints
//! resolved against the directory in `IRONIA_MODEL_CACHE` when present.

mod cache;
mod external;
mod stub;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{read_embeddings, write_embeddings, EmbeddingSidecar};
pub use external::ExternalEncoder;
pub use stub::stub_embed;

pub const EMBEDDING_DIM: usize = 768;
pub const STUB_ENCODER: &str = "stub";
/// Token window the checkpoints were trained with; longer inputs are head-truncated.
pub const MAX_TOKENS: usize = 512;

pub const REFERENCE_ENCODERS: [&str; 5] = [
    "bert-base-uncased",
    "bert-base-multilingual-uncased",
    "dccuchile/bert-base-spanish-wwm-uncased",
    "dccuchile/bert-base-spanish-wwm-cased",
    "beto-cased-finetuned-xix-latam",
];

pub const MODEL_CACHE_ENV: &str = "IRONIA_MODEL_CACHE";
pub const EMBED_COMMAND_ENV: &str = "IRONIA_EMBED_COMMAND";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("unknown encoder '{0}'")]
    UnknownEncoder(String),
    #[error("cannot load encoder '{id}': {reason}")]
    EncoderLoadError { id: String, reason: String },
    #[error("text is empty")]
    EmptyText,
    #[error("embedding must have {EMBEDDING_DIM} finite values (got {len}, finite: {finite})")]
    BadVector { len: usize, finite: bool },
    #[error("embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exactly 768 finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, EncoderError> {
        let finite = values.iter().all(|v| v.is_finite());
        if values.len() != EMBEDDING_DIM || !finite {
            return Err(EncoderError::BadVector { len: values.len(), finite });
        }
        Ok(Embedding(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Hidden state of the first ([CLS]) position.
    #[default]
    FirstToken,
    /// Attention-masked mean over token positions.
    Mean,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::FirstToken => "first_token",
            Pooling::Mean => "mean",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_token" | "cls" => Ok(Pooling::FirstToken),
            "mean" => Ok(Pooling::Mean),
            other => Err(format!("unknown pooling '{other}'")),
        }
    }
}

/// Where an encoder's weights come from: a model-hub id, optionally shadowed
/// by a directory of the same name under the local cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointRef {
    pub hub_id: String,
}

impl CheckpointRef {
    /// Local cache directory if it exists (`/` in the id becomes `__`), else the hub id.
    pub fn resolve(&self, cache_dir: Option<&std::path::Path>) -> String {
        if let Some(dir) = cache_dir {
            let local: PathBuf = dir.join(self.hub_id.replace('/', "__"));
            if local.is_dir() {
                return local.display().to_string();
            }
        }
        self.hub_id.clone()
    }
}

/// Produces embeddings for a resolved checkpoint.
pub trait EncoderBackend: Send + Sync {
    fn embed(&self, checkpoint: &str, texts: &[&str], pooling: Pooling) -> Result<Vec<Embedding>, EncoderError>;
}

/// Read-only map from encoder id to checkpoint.
#[derive(Clone)]
pub struct EncoderRegistry {
    checkpoints: BTreeMap<String, CheckpointRef>,
    cache_dir: Option<PathBuf>,
    backend: Option<Arc<dyn EncoderBackend>>,
}

impl Default for EncoderRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl EncoderRegistry {
    /// The five reference encoders plus `stub`, with no backend configured.
    pub fn new() -> Self {
        let checkpoints = REFERENCE_ENCODERS
            .iter()
            .chain(std::iter::once(&STUB_ENCODER))
            .map(|id| (id.to_string(), CheckpointRef { hub_id: id.to_string() }))
            .collect();
        EncoderRegistry { checkpoints, cache_dir: None, backend: None }
    }

    /// Registry configured from `IRONIA_MODEL_CACHE` and `IRONIA_EMBED_COMMAND`.
    pub fn from_env() -> Self {
        let mut reg = Self::new();
        reg.cache_dir = std::env::var_os(MODEL_CACHE_ENV).map(PathBuf::from);
        if let Some(cmd) = std::env::var(EMBED_COMMAND_ENV).ok().filter(|c| !c.trim().is_empty()) {
            reg.backend = Some(Arc::new(ExternalEncoder::from_command_line(&cmd)));
        }
        reg
    }

    pub fn with_backend(mut self, backend: Arc<dyn EncoderBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    /// Registers (or re-points) an encoder id.
    pub fn register(&mut self, id: impl Into<String>, hub_id: impl Into<String>) {
        self.checkpoints.insert(id.into(), CheckpointRef { hub_id: hub_id.into() });
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.checkpoints.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.checkpoints.contains_key(id)
    }

    /// One embedding per text, in input order.
    pub fn embed<S: AsRef<str>>(
        &self,
        texts: &[S],
        encoder_id: &str,
        pooling: Pooling,
    ) -> Result<Vec<Embedding>, EncoderError> {
        let checkpoint = self.checkpoints.get(encoder_id).ok_or_else(|| EncoderError::UnknownEncoder(encoder_id.into()))?;
        if texts.iter().any(|t| t.as_ref().trim().is_empty()) {
            return Err(EncoderError::EmptyText);
        }
        if encoder_id == STUB_ENCODER {
            // pooling has no meaning for the hash encoder
            return texts.iter().map(|t| stub_embed(t.as_ref())).collect();
        }
        let backend = self.backend.as_ref().ok_or_else(|| EncoderError::EncoderLoadError {
            id: encoder_id.into(),
            reason: format!("no embedding backend configured (set {EMBED_COMMAND_ENV})"),
        })?;
        let resolved = checkpoint.resolve(self.cache_dir.as_deref());
        let refs: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
        let out = backend.embed(&resolved, &refs, pooling).map_err(|e| match e {
            EncoderError::EncoderLoadError { reason, .. } => EncoderError::EncoderLoadError { id: encoder_id.into(), reason },
            other => other,
        })?;
        if out.len() != texts.len() {
            return Err(EncoderError::EncoderLoadError {
                id: encoder_id.into(),
                reason: format!("backend returned {} vectors for {} texts", out.len(), texts.len()),
            });
        }
        Ok(out)
    }
}

impl fmt::Debug for EncoderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncoderRegistry")
            .field("ids", &self.checkpoints.keys().collect::<Vec<_>>())
            .field("cache_dir", &self.cache_dir)
            .field("backend", &self.backend.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_always_has_reference_ids_and_stub() {
        let reg = EncoderRegistry::new();
        for id in REFERENCE_ENCODERS {
            assert!(reg.contains(id), "{id}");
        }
        assert!(reg.contains("stub"));
        assert_eq!(reg.ids().count(), 6);
    }

    #[test]
    fn stub_embeddings_are_768_and_ordered() {
        let reg = EncoderRegistry::new();
        let out = reg.embed(&["uno", "dos", "uno"], "stub", Pooling::FirstToken).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|e| e.as_slice().len() == EMBEDDING_DIM));
        assert_eq!(out[0], out[2]);
        assert_ne!(out[0], out[1]);
        assert_eq!(out[1], stub_embed("dos").unwrap());
    }

    #[test]
    fn hundred_distinct_texts_hundred_distinct_vectors() {
        let texts: Vec<String> = (0..100).map(|i| format!("fragmento {i}")).collect();
        let out = EncoderRegistry::new().embed(&texts, "stub", Pooling::Mean).unwrap();
        let distinct: HashSet<Vec<u64>> =
            out.iter().map(|e| e.as_slice().iter().map(|v| v.to_bits()).collect()).collect();
        assert_eq!(distinct.len(), 100);
    }

    #[test]
    fn unknown_encoder_and_missing_backend() {
        let reg = EncoderRegistry::new();
        assert!(matches!(reg.embed(&["x"], "gpt2", Pooling::Mean), Err(EncoderError::UnknownEncoder(_))));
        assert!(matches!(
            reg.embed(&["x"], "bert-base-uncased", Pooling::Mean),
            Err(EncoderError::EncoderLoadError { .. })
        ));
    }

    #[test]
    fn embedding_rejects_bad_vectors() {
        assert!(Embedding::new(vec![0.0; 767]).is_err());
        let mut v = vec![0.0; 768];
        v[5] = f64::NAN;
        assert!(Embedding::new(v).is_err());
    }

    struct Fixed;

    impl EncoderBackend for Fixed {
        fn embed(&self, checkpoint: &str, texts: &[&str], _pooling: Pooling) -> Result<Vec<Embedding>, EncoderError> {
            assert!(checkpoint.ends_with("dccuchile__bert-base-spanish-wwm-cased"));
            texts.iter().map(|_| Embedding::new(vec![0.5; EMBEDDING_DIM])).collect()
        }
    }

    #[test]
    fn checkpoint_resolves_against_cache_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("dccuchile__bert-base-spanish-wwm-cased")).unwrap();
        let reg = EncoderRegistry::new().with_cache_dir(dir.path()).with_backend(Arc::new(Fixed));
        let out = reg.embed(&["a", "b"], "dccuchile/bert-base-spanish-wwm-cased", Pooling::FirstToken).unwrap();
        assert_eq!(out.len(), 2);
        let r = CheckpointRef { hub_id: "bert-base-uncased".into() };
        assert_eq!(r.resolve(Some(dir.path())), "bert-base-uncased");
    }
}

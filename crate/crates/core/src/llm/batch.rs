use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::client::{CompletionRequest, LlmClient, CLASSIFICATION_WORD_CAP};
use super::parse::{parse_classification_response, word_count};
use super::template::{render_classification_prompt, render_enhancement_prompt, Language};
use super::{FailureKind, LlmError};
use crate::corpus::{Entry, Label};
use crate::util::Clock;

/// A machine tag with its explanation, as parsed from one model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub entry_id: String,
    pub tag: Label,
    pub explanation: String,
    pub raw_response: String,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub entry_id: String,
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    fn new(entry_id: &str, err: &LlmError) -> Self {
        Failure { entry_id: entry_id.to_string(), kind: err.kind(), message: err.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct BatchPolicy {
    /// Extra attempts after the first, for transient failures only.
    pub retries: u32,
    /// Base delay; doubles on every retry.
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub language: Language,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        BatchPolicy { retries: 2, backoff: Duration::from_millis(500), max_in_flight: 4, language: Language::Es }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome<T> {
    pub ok: Vec<T>,
    pub failures: Vec<Failure>,
}

/// Text produced by the enhancement prompt, kept next to the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub entry_id: String,
    pub label: Label,
    pub original_text: String,
    pub expanded_text: String,
}

fn complete_with_retries(client: &dyn LlmClient, req: &CompletionRequest, policy: &BatchPolicy) -> Result<String, LlmError> {
    let mut attempt = 0;
    loop {
        match client.complete(req) {
            Err(e) if e.is_transient() && attempt < policy.retries => {
                let delay = policy.backoff.saturating_mul(1 << attempt.min(16));
                log::debug!("transient failure ({e}); retrying in {delay:?}");
                std::thread::sleep(delay);
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Runs `work` over `items` with at most `max_in_flight` concurrent calls,
/// returning results in input order.
fn run_ordered<I: Sync, O: Send>(items: &[I], max_in_flight: usize, work: impl Fn(&I) -> O + Sync) -> Vec<O> {
    let workers = max_in_flight.clamp(1, items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<O>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = work(&items[i]);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|o| o.expect("every slot filled")).collect()
}

/// Classifies every entry with the classification prompt.
///
/// A failing entry never aborts the batch: it lands in `failures` instead,
/// so `ok.len() + failures.len() == entries.len()`.
pub fn annotate_batch(
    entries: &[Entry],
    client: &dyn LlmClient,
    policy: &BatchPolicy,
    clock: &dyn Clock,
) -> Result<BatchOutcome<Annotation>, LlmError> {
    if entries.is_empty() {
        return Err(LlmError::EmptyBatch);
    }
    let results = run_ordered(entries, policy.max_in_flight, |entry| -> Result<Annotation, LlmError> {
        let prompt = render_classification_prompt(entry, policy.language)?;
        let req = CompletionRequest::new(prompt).with_subject(&entry.id, &entry.text);
        let raw = complete_with_retries(client, &req, policy)?;
        let parsed = parse_classification_response(&raw)?;
        let mut warnings = Vec::new();
        let words = word_count(&raw);
        if words > CLASSIFICATION_WORD_CAP {
            log::warn!("entry {}: response has {words} words (cap {CLASSIFICATION_WORD_CAP})", entry.id);
            warnings.push(format!("response exceeds {CLASSIFICATION_WORD_CAP} words ({words})"));
        }
        Ok(Annotation {
            entry_id: entry.id.clone(),
            tag: parsed.tag,
            explanation: parsed.explanation,
            raw_response: raw,
            model_id: client.model_id().to_string(),
            created_at: clock.now(),
            warnings,
        })
    });
    let mut outcome = BatchOutcome { ok: Vec::new(), failures: Vec::new() };
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok(a) => outcome.ok.push(a),
            Err(e) => outcome.failures.push(Failure::new(&entry.id, &e)),
        }
    }
    Ok(outcome)
}

/// Expands every entry's text with the enhancement prompt, keeping id and
/// gold label. All entries must be labeled.
pub fn enhance_batch(
    entries: &[Entry],
    client: &dyn LlmClient,
    policy: &BatchPolicy,
) -> Result<BatchOutcome<Enhancement>, LlmError> {
    if let Some(e) = entries.iter().find(|e| e.label.is_none()) {
        return Err(LlmError::Unlabeled(e.id.clone()));
    }
    let results = run_ordered(entries, policy.max_in_flight, |entry| -> Result<Enhancement, LlmError> {
        let prompt = render_enhancement_prompt(entry, policy.language)?;
        let mut req = CompletionRequest::new(prompt).with_subject(&entry.id, &entry.text);
        req.max_output_words = usize::MAX;
        let expanded = complete_with_retries(client, &req, policy)?;
        let expanded = expanded.trim();
        if expanded.is_empty() {
            return Err(LlmError::EmptyCompletion);
        }
        Ok(Enhancement {
            entry_id: entry.id.clone(),
            label: entry.label.expect("checked above"),
            original_text: entry.text.clone(),
            expanded_text: expanded.to_string(),
        })
    });
    let mut outcome = BatchOutcome { ok: Vec::new(), failures: Vec::new() };
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok(a) => outcome.ok.push(a),
            Err(e) => outcome.failures.push(Failure::new(&entry.id, &e)),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockClient, MockFallback};
    use crate::util::ManualClock;
    use std::sync::atomic::AtomicU32;

    fn entries(n: usize) -> Vec<Entry> {
        (0..n).map(|i| Entry::new(format!("e{i}"), format!("texto número {i}"), Some(Label::Neutro))).collect()
    }

    fn fast() -> BatchPolicy {
        BatchPolicy { backoff: Duration::from_millis(1), ..Default::default() }
    }

    fn valid_mock(n: usize) -> MockClient {
        (0..n).fold(MockClient::new(), |c, i| c.with_response(format!("e{i}"), format!("'IRONY' *explicación {i}*")))
    }

    #[test]
    fn all_valid() {
        let out = annotate_batch(&entries(5), &valid_mock(5), &fast(), &ManualClock::epoch()).unwrap();
        assert_eq!(out.ok.len(), 5);
        assert!(out.failures.is_empty());
        let ids: Vec<&str> = out.ok.iter().map(|a| a.entry_id.as_str()).collect();
        assert_eq!(ids, ["e0", "e1", "e2", "e3", "e4"]);
        assert_eq!(out.ok[3].explanation, "explicación 3");
        assert_eq!(out.ok[0].model_id, "mock");
    }

    #[test]
    fn one_garbage_response() {
        let client = valid_mock(5).with_response("e2", "I think this is ironic.");
        let out = annotate_batch(&entries(5), &client, &fast(), &ManualClock::epoch()).unwrap();
        assert_eq!(out.ok.len(), 4);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].entry_id, "e2");
        assert_eq!(out.failures[0].kind, FailureKind::TagParseError);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            annotate_batch(&[], &valid_mock(0), &fast(), &ManualClock::epoch()),
            Err(LlmError::EmptyBatch)
        ));
    }

    struct Flaky {
        failures_left: AtomicU32,
    }

    impl LlmClient for Flaky {
        fn complete(&self, _req: &CompletionRequest) -> Result<String, LlmError> {
            if self.failures_left.load(Ordering::SeqCst) > 0 {
                self.failures_left.fetch_sub(1, Ordering::SeqCst);
                Err(LlmError::Transient("connection reset".into()))
            } else {
                Ok("'NEGATIVO' *crítica directa*".into())
            }
        }

        fn model_id(&self) -> &str {
            "flaky"
        }
    }

    #[test]
    fn transient_failure_then_success() {
        let client = Flaky { failures_left: AtomicU32::new(1) };
        let out = annotate_batch(&entries(1), &client, &fast(), &ManualClock::epoch()).unwrap();
        assert_eq!(out.ok.len(), 1);
        assert_eq!(out.ok[0].tag, Label::Negativo);
    }

    #[test]
    fn retries_exhausted_is_recorded_not_thrown() {
        let client = Flaky { failures_left: AtomicU32::new(10) };
        let policy = BatchPolicy { retries: 2, ..fast() };
        let out = annotate_batch(&entries(1), &client, &policy, &ManualClock::epoch()).unwrap();
        assert!(out.ok.is_empty());
        assert_eq!(out.failures[0].kind, FailureKind::Unreachable);
        // first attempt + 2 retries
        assert_eq!(client.failures_left.load(Ordering::SeqCst), 7);
    }

    #[test]
    fn long_responses_are_kept_with_warning() {
        let long = format!("'NEUTRO' *{}*", vec!["palabra"; 600].join(" "));
        let client = MockClient::new().with_fallback(MockFallback::Constant(long));
        let out = annotate_batch(&entries(1), &client, &fast(), &ManualClock::epoch()).unwrap();
        assert_eq!(out.ok.len(), 1);
        assert_eq!(out.ok[0].warnings.len(), 1);
    }

    #[test]
    fn deterministic_across_runs_and_concurrency() {
        let es = entries(40);
        let client = valid_mock(40).with_response("e7", "garbage");
        let clock = ManualClock::epoch();
        let a = annotate_batch(&es, &client, &BatchPolicy { max_in_flight: 1, ..fast() }, &clock).unwrap();
        let b = annotate_batch(&es, &client, &BatchPolicy { max_in_flight: 8, ..fast() }, &clock).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_enhancement() {
        let es = entries(3);
        let out = enhance_batch(&es, &MockClient::identity(), &fast()).unwrap();
        assert_eq!(out.ok.len(), 3);
        for (e, enh) in es.iter().zip(&out.ok) {
            assert_eq!(enh.entry_id, e.id);
            assert_eq!(enh.expanded_text, e.text);
            assert_eq!(enh.original_text, e.text);
            assert_eq!(Some(enh.label), e.label);
        }
    }

    #[test]
    fn enhancement_keeps_ocr_original() {
        let text = "el puente del rio lleva tres anos en obra, y la junta dice que acabara el ano que viene, \
como dijo el pasado";
        let expanded = "El puente del río lleva tres años en obra, y la junta asegura que lo acabará el año que \
viene, tal como prometió el año pasado";
        let entry = Entry::new("a1", text, Some(Label::Negativo));
        let client = MockClient::new().with_response("a1", expanded);
        let out = enhance_batch(&[entry], &client, &fast()).unwrap();
        assert_eq!(out.ok[0].expanded_text, expanded);
        assert_eq!(out.ok[0].label, Label::Negativo);
        assert_eq!(out.ok[0].original_text, text);
    }

    #[test]
    fn enhancement_requires_labels_and_nonempty_completion() {
        let unlabeled = vec![Entry::new("u", "x", None)];
        assert!(matches!(enhance_batch(&unlabeled, &MockClient::identity(), &fast()), Err(LlmError::Unlabeled(_))));
        let client = MockClient::new().with_fallback(MockFallback::Constant("   ".into()));
        let out = enhance_batch(&entries(2), &client, &fast()).unwrap();
        assert_eq!(out.failures.len(), 2);
        assert!(out.failures.iter().all(|f| f.kind == FailureKind::EmptyCompletion));
    }
}

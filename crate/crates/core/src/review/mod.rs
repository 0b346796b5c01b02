//! Human verification queue over machine annotations.
//!
//! State lives in memory and every mutation is appended to a JSONL event
//! log first, so a queue can be rebuilt by replaying its log.

mod http;
mod queue;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassShare, DistributionReport, Entry, Label};
use crate::llm::Annotation;

pub use http::router;
pub use queue::{Event, EventKind, ReviewQueue, ReviewService, DEFAULT_LEASE_MINUTES};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("entry '{0}' is already queued")]
    DuplicateId(String),
    #[error("entry '{0}' is not in the queue")]
    NotFound(String),
    #[error("entry '{0}' is already resolved")]
    AlreadyResolved(String),
    #[error("entry '{entry_id}' is not assigned to reviewer '{reviewer_id}'")]
    NotAssigned { entry_id: String, reviewer_id: String },
    #[error("invalid verdict: {0}")]
    InvalidVerdict(String),
    #[error("{unresolved} items are not resolved yet")]
    IncompleteQueue { unresolved: usize },
    #[error("annotation for '{0}' does not match its entry")]
    Mismatch(String),
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Assigned,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Override,
    Unreadable,
}

/// What a reviewer submits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRequest {
    pub entry_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_tag: Option<Label>,
    pub reviewer_id: String,
}

impl VerdictRequest {
    pub fn accept(entry_id: impl Into<String>, reviewer_id: impl Into<String>) -> Self {
        VerdictRequest { entry_id: entry_id.into(), decision: Decision::Accept, override_tag: None, reviewer_id: reviewer_id.into() }
    }

    pub fn override_to(entry_id: impl Into<String>, reviewer_id: impl Into<String>, tag: Label) -> Self {
        VerdictRequest {
            entry_id: entry_id.into(),
            decision: Decision::Override,
            override_tag: Some(tag),
            reviewer_id: reviewer_id.into(),
        }
    }

    pub fn unreadable(entry_id: impl Into<String>, reviewer_id: impl Into<String>) -> Self {
        VerdictRequest {
            entry_id: entry_id.into(),
            decision: Decision::Unreadable,
            override_tag: None,
            reviewer_id: reviewer_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub override_tag: Option<Label>,
    pub reviewer_id: String,
    pub decided_at: DateTime<Utc>,
    /// Machine tag on accept, the override on override, none when unreadable.
    pub final_tag: Option<Label>,
}

impl Verdict {
    /// Checks the request against the machine tag and derives `final_tag`.
    pub fn derive(req: &VerdictRequest, machine_tag: Label, decided_at: DateTime<Utc>) -> Result<Self, ReviewError> {
        let final_tag = match (req.decision, req.override_tag) {
            (Decision::Accept, None) => Some(machine_tag),
            (Decision::Unreadable, None) => None,
            (Decision::Override, Some(tag)) if tag == machine_tag => {
                return Err(ReviewError::InvalidVerdict(format!("override tag {tag} equals the machine tag")))
            }
            (Decision::Override, Some(Label::NoIronia)) => {
                return Err(ReviewError::InvalidVerdict("override tag must be one of the four sentiment labels".into()))
            }
            (Decision::Override, Some(tag)) => Some(tag),
            (Decision::Override, None) => return Err(ReviewError::InvalidVerdict("override requires override_tag".into())),
            (_, Some(_)) => return Err(ReviewError::InvalidVerdict("override_tag is only allowed with override".into())),
        };
        if req.reviewer_id.trim().is_empty() {
            return Err(ReviewError::InvalidVerdict("reviewer_id is empty".into()));
        }
        Ok(Verdict {
            decision: req.decision,
            override_tag: req.override_tag,
            reviewer_id: req.reviewer_id.clone(),
            decided_at,
            final_tag,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub entry: Entry,
    pub annotation: Annotation,
    pub status: Status,
    pub assigned_to: Option<String>,
    pub lease_expiry: Option<DateTime<Utc>>,
    pub verdict: Option<Verdict>,
}

impl ReviewItem {
    pub fn id(&self) -> &str {
        &self.entry.id
    }

    /// Status as seen at `now`: an expired lease counts as pending.
    pub fn status_at(&self, now: DateTime<Utc>) -> Status {
        match (self.status, self.lease_expiry) {
            (Status::Assigned, Some(exp)) if exp <= now => Status::Pending,
            (s, _) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueCounts {
    pub pending: usize,
    pub assigned: usize,
    pub resolved: usize,
    pub unreadable: usize,
    pub total: usize,
}

/// Machine tags against final human tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub total: usize,
    pub machine: Vec<ClassShare>,
    pub human: Vec<ClassShare>,
    pub unreadable_count: usize,
    /// Share of the human column; the machine column has no such row.
    pub unreadable_percentage: f64,
}

impl AgreementReport {
    pub fn machine_percentage(&self, label: Label) -> Option<f64> {
        self.machine.iter().find(|r| r.label == label).map(|r| r.percentage)
    }

    pub fn human_percentage(&self, label: Label) -> Option<f64> {
        self.human.iter().find(|r| r.label == label).map(|r| r.percentage)
    }
}

impl std::fmt::Display for AgreementReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "| Tag | Machine | Human |")?;
        writeln!(f, "|---|---:|---:|")?;
        for (m, h) in self.machine.iter().zip(&self.human) {
            writeln!(f, "| {} | {:.2}% | {:.2}% |", m.label.report_name(), m.percentage, h.percentage)?;
        }
        write!(f, "| UNREADABLE | | {:.2}% |", self.unreadable_percentage)
    }
}

/// Payload of the statistics endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub counts: QueueCounts,
    /// Computed over the resolved items so far.
    pub agreement: AgreementReport,
    /// Final human tags of resolved, readable items.
    pub distribution: Option<DistributionReport>,
}

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    AgreementReport, QueueCounts, QueueStats, ReviewError, ReviewItem, Status, Verdict, VerdictRequest,
};
use crate::corpus::{distribution_from_counts, percent_2dp, ClassShare, Entry, Label, Mode, Provenance, VersionTag};
use crate::llm::Annotation;
use crate::util::Clock;

pub const DEFAULT_LEASE_MINUTES: i64 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Enqueued { entry: Entry, annotation: Annotation },
    Assigned { entry_id: String, reviewer_id: String, lease_expiry: DateTime<Utc> },
    Verdict { entry_id: String, verdict: Verdict },
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Single-writer queue state. Wrap it in [`ReviewService`] to share it.
pub struct ReviewQueue {
    items: IndexMap<String, ReviewItem>,
    log: Option<File>,
    seq: u64,
    clock: Arc<dyn Clock>,
    lease: Duration,
}

impl std::fmt::Debug for ReviewQueue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewQueue").field("items", &self.items.len()).field("seq", &self.seq).finish()
    }
}

fn tally(labels: impl Iterator<Item = Label>) -> [usize; 4] {
    let mut counts = [0usize; 4];
    for l in labels {
        if let Some(i) = Label::MULTICLASS.iter().position(|&m| m == l) {
            counts[i] += 1;
        }
    }
    counts
}

fn shares(counts: [usize; 4], total: usize) -> Vec<ClassShare> {
    Mode::Multiclass
        .labels()
        .iter()
        .map(|&label| {
            let count = counts[Label::MULTICLASS.iter().position(|&m| m == label).unwrap()];
            ClassShare { label, count, percentage: if total == 0 { 0.0 } else { percent_2dp(count, total) } }
        })
        .collect()
}

impl ReviewQueue {
    /// A queue with no backing log.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        ReviewQueue { items: IndexMap::new(), log: None, seq: 0, clock, lease: Duration::minutes(DEFAULT_LEASE_MINUTES) }
    }

    /// Opens (or creates) a file-backed queue, replaying any existing events.
    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, ReviewError> {
        let path = path.as_ref();
        let mut queue = Self::in_memory(clock);
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line)
                    .map_err(|e| ReviewError::Log { line: i + 1, message: e.to_string() })?;
                if event.seq <= queue.seq {
                    return Err(ReviewError::Log { line: i + 1, message: format!("sequence {} is not increasing", event.seq) });
                }
                queue.seq = event.seq;
                queue.apply(event.kind).map_err(|e| ReviewError::Log { line: i + 1, message: e.to_string() })?;
            }
        }
        queue.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(queue)
    }

    pub fn with_lease(mut self, lease: Duration) -> Self {
        self.lease = lease;
        self
    }

    pub fn lease(&self) -> Duration {
        self.lease
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn apply(&mut self, kind: EventKind) -> Result<(), ReviewError> {
        match kind {
            EventKind::Enqueued { entry, annotation } => {
                if self.items.contains_key(&entry.id) {
                    return Err(ReviewError::DuplicateId(entry.id));
                }
                let item = ReviewItem { entry, annotation, status: Status::Pending, assigned_to: None, lease_expiry: None, verdict: None };
                self.items.insert(item.entry.id.clone(), item);
            }
            EventKind::Assigned { entry_id, reviewer_id, lease_expiry } => {
                let item = self.items.get_mut(&entry_id).ok_or(ReviewError::NotFound(entry_id))?;
                item.status = Status::Assigned;
                item.assigned_to = Some(reviewer_id);
                item.lease_expiry = Some(lease_expiry);
            }
            EventKind::Verdict { entry_id, verdict } => {
                let item = self.items.get_mut(&entry_id).ok_or(ReviewError::NotFound(entry_id))?;
                item.status = Status::Resolved;
                item.lease_expiry = None;
                item.verdict = Some(verdict);
            }
        }
        Ok(())
    }

    /// Appends to the log first, then applies to memory.
    fn commit(&mut self, kind: EventKind, sync: bool) -> Result<(), ReviewError> {
        let event = Event { seq: self.seq + 1, at: self.clock.now(), kind };
        if let Some(log) = self.log.as_mut() {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            log.write_all(line.as_bytes())?;
            if sync {
                log.sync_data()?;
            }
        }
        self.seq = event.seq;
        self.apply(event.kind)
    }

    /// Queues machine-annotated entries. All ids are checked before anything is written.
    pub fn enqueue(&mut self, batch: Vec<(Entry, Annotation)>) -> Result<usize, ReviewError> {
        let mut seen = std::collections::HashSet::new();
        for (entry, annotation) in &batch {
            if annotation.entry_id != entry.id {
                return Err(ReviewError::Mismatch(entry.id.clone()));
            }
            if self.items.contains_key(&entry.id) || !seen.insert(entry.id.as_str()) {
                return Err(ReviewError::DuplicateId(entry.id.clone()));
            }
        }
        let n = batch.len();
        for (entry, annotation) in batch {
            self.commit(EventKind::Enqueued { entry, annotation }, false)?;
        }
        if let Some(log) = self.log.as_mut() {
            log.sync_data()?;
        }
        Ok(n)
    }

    /// Leases the oldest pending item (expired leases included) to `reviewer_id`.
    pub fn next_pending(&mut self, reviewer_id: &str) -> Result<Option<ReviewItem>, ReviewError> {
        let now = self.clock.now();
        let Some(id) = self.items.values().find(|i| i.status_at(now) == Status::Pending).map(|i| i.entry.id.clone())
        else {
            return Ok(None);
        };
        let lease_expiry = now + self.lease;
        self.commit(EventKind::Assigned { entry_id: id.clone(), reviewer_id: reviewer_id.to_string(), lease_expiry }, false)?;
        Ok(self.items.get(&id).cloned())
    }

    /// Resolves an item held by the submitting reviewer.
    pub fn submit_verdict(&mut self, req: &VerdictRequest) -> Result<ReviewItem, ReviewError> {
        let now = self.clock.now();
        let item = self.items.get(&req.entry_id).ok_or_else(|| ReviewError::NotFound(req.entry_id.clone()))?;
        if item.status == Status::Resolved {
            return Err(ReviewError::AlreadyResolved(req.entry_id.clone()));
        }
        if item.status != Status::Assigned || item.assigned_to.as_deref() != Some(req.reviewer_id.as_str()) {
            return Err(ReviewError::NotAssigned { entry_id: req.entry_id.clone(), reviewer_id: req.reviewer_id.clone() });
        }
        let verdict = Verdict::derive(req, item.annotation.tag, now)?;
        self.commit(EventKind::Verdict { entry_id: req.entry_id.clone(), verdict }, true)?;
        Ok(self.items[&req.entry_id].clone())
    }

    pub fn get(&self, entry_id: &str) -> Option<ReviewItem> {
        let now = self.clock.now();
        self.items.get(entry_id).map(|i| {
            let mut view = i.clone();
            if view.status_at(now) == Status::Pending {
                view.status = Status::Pending;
                view.assigned_to = None;
                view.lease_expiry = None;
            }
            view
        })
    }

    pub fn items(&self) -> impl Iterator<Item = &ReviewItem> {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    pub fn counts(&self) -> QueueCounts {
        let now = self.clock.now();
        let mut c = QueueCounts { pending: 0, assigned: 0, resolved: 0, unreadable: 0, total: self.items.len() };
        for item in self.items.values() {
            match item.status_at(now) {
                Status::Pending => c.pending += 1,
                Status::Assigned => c.assigned += 1,
                Status::Resolved => {
                    c.resolved += 1;
                    if item.verdict.as_ref().is_some_and(|v| v.final_tag.is_none()) {
                        c.unreadable += 1;
                    }
                }
            }
        }
        c
    }

    fn require_complete(&self) -> Result<(), ReviewError> {
        let unresolved = self.items.values().filter(|i| i.status != Status::Resolved).count();
        if unresolved > 0 {
            return Err(ReviewError::IncompleteQueue { unresolved });
        }
        Ok(())
    }

    fn agreement_over_resolved(&self) -> AgreementReport {
        let resolved: Vec<&ReviewItem> = self.items.values().filter(|i| i.status == Status::Resolved).collect();
        let total = resolved.len();
        let machine = tally(resolved.iter().map(|i| i.annotation.tag));
        let human = tally(resolved.iter().filter_map(|i| i.verdict.as_ref().and_then(|v| v.final_tag)));
        let unreadable_count = resolved.iter().filter(|i| i.verdict.as_ref().is_some_and(|v| v.final_tag.is_none())).count();
        AgreementReport {
            total,
            machine: shares(machine, total),
            human: shares(human, total),
            unreadable_count,
            unreadable_percentage: if total == 0 { 0.0 } else { percent_2dp(unreadable_count, total) },
        }
    }

    /// Machine vs human tag distribution once every item is resolved.
    pub fn agreement_report(&self) -> Result<AgreementReport, ReviewError> {
        self.require_complete()?;
        Ok(self.agreement_over_resolved())
    }

    /// Live statistics over whatever has been resolved so far.
    pub fn stats(&self) -> QueueStats {
        let agreement = self.agreement_over_resolved();
        let counts: Vec<(Label, usize)> = agreement.human.iter().map(|s| (s.label, s.count)).collect();
        QueueStats { counts: self.counts(), distribution: distribution_from_counts(&counts).ok(), agreement }
    }

    /// Readable resolved items as entries labeled with their final tag.
    pub fn export_verified(&self) -> Result<Vec<Entry>, ReviewError> {
        self.require_complete()?;
        Ok(self
            .items
            .values()
            .filter_map(|i| {
                let tag = i.verdict.as_ref()?.final_tag?;
                let mut e = Entry::new(i.entry.id.clone(), i.entry.text.clone(), Some(tag))
                    .with_provenance(Provenance::MachineVerified)
                    .with_version(VersionTag::Augmented);
                e.category_encoded = tag.encode(Mode::Multiclass);
                Some(e)
            })
            .collect())
    }
}

/// Thread-safe handle; all mutations go through one lock.
#[derive(Debug, Clone)]
pub struct ReviewService {
    inner: Arc<Mutex<ReviewQueue>>,
}

impl ReviewService {
    pub fn new(queue: ReviewQueue) -> Self {
        ReviewService { inner: Arc::new(Mutex::new(queue)) }
    }

    fn lock(&self) -> MutexGuard<'_, ReviewQueue> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn enqueue(&self, batch: Vec<(Entry, Annotation)>) -> Result<usize, ReviewError> {
        self.lock().enqueue(batch)
    }

    pub fn next_pending(&self, reviewer_id: &str) -> Result<Option<ReviewItem>, ReviewError> {
        self.lock().next_pending(reviewer_id)
    }

    pub fn submit_verdict(&self, req: &VerdictRequest) -> Result<ReviewItem, ReviewError> {
        self.lock().submit_verdict(req)
    }

    pub fn get(&self, entry_id: &str) -> Option<ReviewItem> {
        self.lock().get(entry_id)
    }

    pub fn counts(&self) -> QueueCounts {
        self.lock().counts()
    }

    pub fn stats(&self) -> QueueStats {
        self.lock().stats()
    }

    pub fn agreement_report(&self) -> Result<AgreementReport, ReviewError> {
        self.lock().agreement_report()
    }

    pub fn export_verified(&self) -> Result<Vec<Entry>, ReviewError> {
        self.lock().export_verified()
    }

    /// Runs `f` against a consistent snapshot of the queue.
    pub fn with_queue<R>(&self, f: impl FnOnce(&ReviewQueue) -> R) -> R {
        f(&self.lock())
    }
}

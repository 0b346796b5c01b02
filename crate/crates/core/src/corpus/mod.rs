//! Entries, dataset versions and the label bookkeeping around them.
//!
//! A [`Dataset`] is an immutable value once built: every operation here takes
//! a dataset by reference and returns a new one.

mod io;
mod label;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_dataset, load_dataset_as, save_jsonl, write_jsonl, DataFormat};
pub use label::{Label, Mode};
pub use split::{split, Split, SplitRatios, DEFAULT_SPLIT_SEED};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate entry id '{0}'")]
    DuplicateId(String),
    #[error("entry '{id}': unknown label '{label}'")]
    UnknownLabel { id: String, label: String },
    #[error("entry '{0}': text is empty")]
    EmptyText(String),
    #[error("entry '{id}': category_encoded {found} does not match label {label} (expected {expected})")]
    InconsistentEncoding { id: String, label: Label, found: u8, expected: u8 },
    #[error("mode error: {0}")]
    ModeError(String),
    #[error("entry '{0}' has no label")]
    MissingLabel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid split ratios {0:?}: must be positive and sum to 1")]
    RatioError([f64; 3]),
    #[error("class {label} has {count} entries; stratified splitting needs at least 3")]
    StratifyError { label: Label, count: usize },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Human,
    Machine,
    MachineVerified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VersionTag {
    #[default]
    Primary,
    Enhanced,
    Augmented,
    Custom,
}

/// One newspaper fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub category_encoded: Option<u8>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub version_tag: VersionTag,
}

impl Entry {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Entry {
            id: id.into(),
            text: text.into(),
            label,
            category_encoded: None,
            provenance: Provenance::Human,
            version_tag: VersionTag::Primary,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_version(mut self, version_tag: VersionTag) -> Self {
        self.version_tag = version_tag;
        self
    }

    fn require_label(&self) -> Result<Label> {
        self.label.ok_or_else(|| CorpusError::MissingLabel(self.id.clone()))
    }
}

/// An ordered, id-unique collection of entries in a single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    mode: Mode,
    entries: Vec<Entry>,
}

impl Dataset {
    /// Validates every dataset invariant before constructing.
    pub fn new(name: impl Into<String>, mode: Mode, entries: Vec<Entry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
            if e.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(e.id.clone()));
            }
            if let Some(label) = e.label {
                let expected = label.encode(mode).ok_or_else(|| CorpusError::UnknownLabel {
                    id: e.id.clone(),
                    label: format!("{label} (not a {mode} label)"),
                })?;
                if let Some(found) = e.category_encoded {
                    if found != expected {
                        return Err(CorpusError::InconsistentEncoding { id: e.id.clone(), label, found, expected });
                    }
                }
            }
        }
        Ok(Dataset { name: name.into(), mode, entries })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Per-label counts over labeled entries, in the mode's label order.
    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts: BTreeMap<Label, usize> = self.mode.labels().iter().map(|&l| (l, 0)).collect();
        for label in self.entries.iter().filter_map(|e| e.label) {
            *counts.entry(label).or_default() += 1;
        }
        counts
    }

    /// Labels as class indices (the `category_encoded` values).
    pub fn class_indices(&self) -> Result<Vec<usize>> {
        self.entries
            .iter()
            .map(|e| {
                let label = e.require_label()?;
                Ok(label.encode(self.mode).expect("validated on construction") as usize)
            })
            .collect()
    }
}

/// Collapses POSITIVO, NEGATIVO and NEUTRO into NO_IRONÍA.
pub fn to_binary(ds: &Dataset) -> Result<Dataset> {
    if ds.mode == Mode::Binary {
        return Err(CorpusError::ModeError(format!("dataset '{}' is already binary", ds.name)));
    }
    let entries = ds
        .entries
        .iter()
        .map(|e| {
            let label = e.label.map(Label::to_binary);
            Entry {
                label,
                category_encoded: match (label, e.category_encoded) {
                    (Some(l), Some(_)) => l.encode(Mode::Binary),
                    _ => None,
                },
                ..e.clone()
            }
        })
        .collect();
    Dataset::new(ds.name.clone(), Mode::Binary, entries)
}

/// Fills `category_encoded` for every entry. Idempotent.
pub fn encode_categories(ds: &Dataset) -> Result<Dataset> {
    let mut entries = ds.entries.clone();
    for e in &mut entries {
        let label = e.require_label()?;
        e.category_encoded = label.encode(ds.mode);
    }
    Dataset::new(ds.name.clone(), ds.mode, entries)
}

/// One row of a [`DistributionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub label: Label,
    pub count: usize,
    /// Percentage rounded half-up to two decimals.
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rows: Vec<ClassShare>,
    pub total: usize,
}

impl DistributionReport {
    pub fn percentage(&self, label: Label) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.percentage)
    }

    pub fn count(&self, label: Label) -> Option<usize> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.count)
    }
}

impl fmt::Display for DistributionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "| Category | Count | Share |")?;
        writeln!(f, "|---|---:|---:|")?;
        for r in &self.rows {
            writeln!(f, "| {} | {} | {:.2}% |", r.label.report_name(), r.count, r.percentage)?;
        }
        write!(f, "| TOTAL | {} | 100.00% |", self.total)
    }
}

/// `100 * count / total` rounded half-up to two decimals, in exact integer arithmetic.
pub fn percent_2dp(count: usize, total: usize) -> f64 {
    assert!(total > 0);
    let (c, t) = (count as u128, total as u128);
    let hundredths = (20_000 * c + t) / (2 * t);
    hundredths as f64 / 100.0
}

/// Builds a distribution report from raw per-label counts.
pub fn distribution_from_counts(counts: &[(Label, usize)]) -> Result<DistributionReport> {
    let total: usize = counts.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return Err(CorpusError::EmptyDataset);
    }
    let rows = counts
        .iter()
        .map(|&(label, count)| ClassShare { label, count, percentage: percent_2dp(count, total) })
        .collect();
    Ok(DistributionReport { rows, total })
}

pub fn class_distribution(ds: &Dataset) -> Result<DistributionReport> {
    if ds.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    if let Some(e) = ds.entries.iter().find(|e| e.label.is_none()) {
        return Err(CorpusError::MissingLabel(e.id.clone()));
    }
    let counts: Vec<(Label, usize)> = ds.label_counts().into_iter().collect();
    distribution_from_counts(&counts)
}

/// Appends human-verified machine annotations to a primary dataset.
///
/// Verified entries must carry `machine_verified` provenance and a final
/// label; an entry without a label is an unreadable item that should never
/// have been exported.
pub fn merge_augmented(primary: &Dataset, verified: &[Entry]) -> Result<Dataset> {
    let mut entries = Vec::with_capacity(primary.len() + verified.len());
    entries.extend(primary.entries.iter().cloned().map(|e| e.with_version(VersionTag::Augmented)));
    for v in verified {
        if v.provenance != Provenance::MachineVerified {
            return Err(CorpusError::ContractViolation(format!(
                "entry '{}' has provenance {:?}, expected machine_verified",
                v.id, v.provenance
            )));
        }
        let Some(label) = v.label else {
            return Err(CorpusError::ContractViolation(format!("entry '{}' is unreadable (no final label)", v.id)));
        };
        let label = match primary.mode {
            Mode::Binary if label != Label::NoIronia => label.to_binary(),
            _ => label,
        };
        entries.push(Entry {
            label: Some(label),
            category_encoded: label.encode(primary.mode),
            version_tag: VersionTag::Augmented,
            ..v.clone()
        });
    }
    Dataset::new(primary.name.clone(), primary.mode, entries)
}

/// Replaces entry texts by id, tagging the result as the enhanced version.
/// Entries without a replacement keep their original text.
pub fn apply_enhancements<'a>(
    ds: &Dataset,
    replacements: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Dataset> {
    let map: std::collections::HashMap<&str, &str> = replacements.into_iter().collect();
    let entries = ds
        .entries
        .iter()
        .map(|e| {
            let text = map.get(e.id.as_str()).map(|t| t.to_string()).unwrap_or_else(|| e.text.clone());
            Entry { text, version_tag: VersionTag::Enhanced, ..e.clone() }
        })
        .collect();
    Dataset::new(ds.name.clone(), ds.mode, entries)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A multiclass dataset with the given per-label counts, ids `e0..`.
    pub fn with_counts(counts: &[(Label, usize)]) -> Dataset {
        let mut entries = Vec::new();
        for &(label, n) in counts {
            for _ in 0..n {
                let i = entries.len();
                entries.push(Entry::new(format!("e{i}"), format!("texto {i}"), Some(label)));
            }
        }
        Dataset::new("fixture", Mode::Multiclass, entries).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::with_counts;
    use super::*;

    #[test]
    fn binary_merge_maps_labels() {
        let ds = with_counts(&[(Label::Positivo, 1), (Label::Ironia, 1)]);
        let bin = to_binary(&ds).unwrap();
        assert_eq!(bin.mode(), Mode::Binary);
        assert_eq!(bin.entries()[0].label, Some(Label::NoIronia));
        assert_eq!(bin.entries()[1].label, Some(Label::Ironia));
        assert_eq!(bin.entries()[0].text, ds.entries()[0].text);
        assert!(matches!(to_binary(&bin), Err(CorpusError::ModeError(_))));
    }

    #[test]
    fn binary_merge_primary_counts() {
        // reference primary percentages times 2734, rounded.
        let ds = with_counts(&[
            (Label::Ironia, 292),
            (Label::Negativo, 701),
            (Label::Neutro, 790),
            (Label::Positivo, 951),
        ]);
        let counts = to_binary(&ds).unwrap().label_counts();
        assert_eq!(counts[&Label::Ironia], 292);
        assert_eq!(counts[&Label::NoIronia], 2442);
    }

    #[test]
    fn encode_categories_is_idempotent() {
        let ds = with_counts(&[(Label::Ironia, 1), (Label::Positivo, 1)]);
        let once = encode_categories(&ds).unwrap();
        assert_eq!(once.entries()[0].category_encoded, Some(0));
        assert_eq!(once.entries()[1].category_encoded, Some(3));
        assert_eq!(encode_categories(&once).unwrap(), once);

        let bin = encode_categories(&to_binary(&ds).unwrap()).unwrap();
        assert_eq!(bin.entries()[0].category_encoded, Some(1));
        assert_eq!(bin.entries()[1].category_encoded, Some(0));
    }

    #[test]
    fn encode_categories_requires_labels() {
        let ds = Dataset::new("x", Mode::Multiclass, vec![Entry::new("a", "t", None)]).unwrap();
        assert!(matches!(encode_categories(&ds), Err(CorpusError::MissingLabel(id)) if id == "a"));
    }

    #[test]
    fn dataset_rejects_inconsistent_encoding() {
        let mut e = Entry::new("a", "t", Some(Label::Ironia));
        e.category_encoded = Some(3);
        assert!(matches!(
            Dataset::new("x", Mode::Multiclass, vec![e]),
            Err(CorpusError::InconsistentEncoding { .. })
        ));
    }

    #[test]
    fn dataset_rejects_whitespace_text() {
        let e = Entry::new("a", "  \n ", None);
        assert!(matches!(Dataset::new("x", Mode::Multiclass, vec![e]), Err(CorpusError::EmptyText(_))));
    }

    #[test]
    fn distribution_augmented_column() {
        let ds = with_counts(&[
            (Label::Ironia, 840),
            (Label::Negativo, 837),
            (Label::Neutro, 1092),
            (Label::Positivo, 981),
        ]);
        let report = class_distribution(&ds).unwrap();
        assert_eq!(report.total, 3750);
        let pct: Vec<f64> = report.rows.iter().map(|r| r.percentage).collect();
        assert_eq!(pct, vec![22.40, 22.32, 29.12, 26.16]);
    }

    #[test]
    fn distribution_primary_column() {
        let ds = with_counts(&[
            (Label::Ironia, 292),
            (Label::Negativo, 701),
            (Label::Neutro, 790),
            (Label::Positivo, 951),
        ]);
        let report = class_distribution(&ds).unwrap();
        let pct: Vec<f64> = report.rows.iter().map(|r| r.percentage).collect();
        assert_eq!(pct, vec![10.68, 25.64, 28.90, 34.78]);
        // the reference column prints 28.89
        assert!((report.percentage(Label::Neutro).unwrap() - 28.89).abs() <= 0.01 + 1e-9);
    }

    #[test]
    fn distribution_single_class() {
        let ds = with_counts(&[(Label::Neutro, 5)]);
        let report = class_distribution(&ds).unwrap();
        assert_eq!(report.percentage(Label::Neutro), Some(100.0));
        assert_eq!(report.percentage(Label::Ironia), Some(0.0));
    }

    #[test]
    fn distribution_of_empty_dataset_fails() {
        let ds = Dataset::new("x", Mode::Multiclass, vec![]).unwrap();
        assert!(matches!(class_distribution(&ds), Err(CorpusError::EmptyDataset)));
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent_2dp(1, 8), 12.5);
        // 1/800 = 0.125% rounds up to 0.13
        assert_eq!(percent_2dp(1, 800), 0.13);
        assert_eq!(percent_2dp(2, 3), 66.67);
    }

    fn verified(id: &str, label: Option<Label>) -> Entry {
        Entry::new(id, "nuevo", label).with_provenance(Provenance::MachineVerified)
    }

    #[test]
    fn merge_reference_sizes() {
        let primary = with_counts(&[(Label::Neutro, 2734)]);
        let extra: Vec<Entry> = (0..1016).map(|i| verified(&format!("v{i}"), Some(Label::Ironia))).collect();
        let merged = merge_augmented(&primary, &extra).unwrap();
        assert_eq!(merged.len(), 3750);
        assert!(merged.entries().iter().all(|e| e.version_tag == VersionTag::Augmented));
    }

    #[test]
    fn merge_empty_only_retags() {
        let primary = with_counts(&[(Label::Neutro, 3)]);
        let merged = merge_augmented(&primary, &[]).unwrap();
        assert_eq!(merged.len(), 3);
        for (a, b) in merged.entries().iter().zip(primary.entries()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.version_tag, VersionTag::Augmented);
        }
    }

    #[test]
    fn merge_rejects_collisions_and_unreadable() {
        let primary = with_counts(&[(Label::Neutro, 3)]);
        assert!(matches!(
            merge_augmented(&primary, &[verified("e0", Some(Label::Ironia))]),
            Err(CorpusError::DuplicateId(id)) if id == "e0"
        ));
        assert!(matches!(
            merge_augmented(&primary, &[verified("v", None)]),
            Err(CorpusError::ContractViolation(_))
        ));
        let human = Entry::new("v", "x", Some(Label::Ironia));
        assert!(matches!(merge_augmented(&primary, &[human]), Err(CorpusError::ContractViolation(_))));
    }

    #[test]
    fn merge_into_binary_primary_converts_labels() {
        let primary = to_binary(&with_counts(&[(Label::Neutro, 3)])).unwrap();
        let merged = merge_augmented(&primary, &[verified("v", Some(Label::Positivo))]).unwrap();
        assert_eq!(merged.get("v").unwrap().label, Some(Label::NoIronia));
    }

    #[test]
    fn enhancements_replace_text_by_id() {
        let ds = with_counts(&[(Label::Neutro, 2)]);
        let out = apply_enhancements(&ds, [("e1", "texto expandido")]).unwrap();
        assert_eq!(out.get("e0").unwrap().text, "texto 0");
        assert_eq!(out.get("e1").unwrap().text, "texto expandido");
        assert_eq!(out.get("e1").unwrap().label, Some(Label::Neutro));
        assert!(out.entries().iter().all(|e| e.version_tag == VersionTag::Enhanced));
    }
}

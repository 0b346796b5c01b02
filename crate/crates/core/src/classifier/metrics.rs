use serde::{Deserialize, Serialize};

use super::head::{forward, HeadParams};
use super::train::Examples;
use super::ClassifierError;
use crate::corpus::{Label, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Support-weighted mean ("W. AVG" row).
    Weighted,
    /// Unweighted mean ("AVG" row).
    Macro,
}

impl Averaging {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Multiclass => Averaging::Weighted,
            Mode::Binary => Averaging::Macro,
        }
    }

    pub fn row_label(self) -> &'static str {
        match self {
            Averaging::Weighted => "W. AVG",
            Averaging::Macro => "AVG",
        }
    }
}

/// Square count matrix; rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<Label>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<Label>, counts: Vec<Vec<u64>>) -> Result<Self, ClassifierError> {
        let k = labels.len();
        if !(k == 2 || k == 4) {
            return Err(ClassifierError::DimError(format!("confusion matrix must be 2x2 or 4x4, got {k} labels")));
        }
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(ClassifierError::DimError(format!("confusion matrix is not {k}x{k}")));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    /// Empty matrix over the mode's labels in report order.
    pub fn zeros(mode: Mode) -> Self {
        let k = mode.num_classes();
        ConfusionMatrix { labels: mode.labels().to_vec(), counts: vec![vec![0; k]; k] }
    }

    pub fn record(&mut self, gold: Label, predicted: Label) -> Result<(), ClassifierError> {
        let pos = |l: Label| {
            self.labels.iter().position(|&x| x == l).ok_or(ClassifierError::LabelError { target: 0, classes: self.labels.len() })
        };
        let (g, p) = (pos(gold)?, pos(predicted)?);
        self.counts[g][p] += 1;
        Ok(())
    }

    /// Adds another matrix over the same labels.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.labels, other.labels);
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            r.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// A zero denominator forced at least one metric to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub mode: Mode,
    pub averaging: Averaging,
    pub classes: Vec<ClassMetrics>,
    pub aggregate: Aggregate,
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn class(&self, label: Label) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix, averaging: Averaging) -> Result<EvalReport, ClassifierError> {
    let total = cm.total();
    if total == 0 {
        return Err(ClassifierError::EmptyConfusion);
    }
    let k = cm.labels.len();
    let mode = if cm.labels.contains(&Label::NoIronia) || k == 2 { Mode::Binary } else { Mode::Multiclass };
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = cm.counts[i][i];
            let row: u64 = cm.counts[i].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
            let (precision, dp) = ratio(tp, col);
            let (recall, dr) = ratio(tp, row);
            let (f1, df) = if precision + recall > 0.0 {
                (2.0 * precision * recall / (precision + recall), false)
            } else {
                (0.0, true)
            };
            ClassMetrics { label: cm.labels[i], precision, recall, f1, support: row, degenerate: dp || dr || df }
        })
        .collect();
    let avg = |f: fn(&ClassMetrics) -> f64| match averaging {
        Averaging::Weighted => classes.iter().map(|c| c.support as f64 * f(c)).sum::<f64>() / total as f64,
        Averaging::Macro => classes.iter().map(f).sum::<f64>() / k as f64,
    };
    let aggregate = Aggregate { precision: avg(|c| c.precision), recall: avg(|c| c.recall), f1: avg(|c| c.f1) };
    let trace: u64 = (0..k).map(|i| cm.counts[i][i]).sum();
    Ok(EvalReport {
        model: String::new(),
        mode,
        averaging,
        classes,
        aggregate,
        accuracy: trace as f64 / total as f64,
        total,
        confusion: cm.clone(),
    })
}

/// Confusion of argmax predictions against targets (class indices in the
/// `category_encoded` convention of `mode`).
pub fn confusion_for(head: &HeadParams, examples: &Examples) -> Result<ConfusionMatrix, ClassifierError> {
    let mode = head.mode();
    let mut cm = ConfusionMatrix::zeros(mode);
    for (x, &t) in examples.inputs.iter().zip(&examples.targets) {
        let predicted = forward(head, x.as_slice())?.argmax();
        let label = |i: usize| mode.label_for_index(i).ok_or(ClassifierError::LabelError { target: i, classes: mode.num_classes() });
        cm.record(label(t)?, label(predicted)?)?;
    }
    Ok(cm)
}

/// Scores the head on a labeled test set: weighted aggregate for
/// multiclass heads, macro for binary ones.
pub fn evaluate(head: &HeadParams, test_set: &Examples) -> Result<EvalReport, ClassifierError> {
    if test_set.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let cm = confusion_for(head, test_set)?;
    metrics_from_confusion(&cm, Averaging::for_mode(head.mode()))
}

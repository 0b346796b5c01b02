//! Feed-forward classification head over frozen 768-d embeddings, its
//! training loop, evaluation metrics and report emission.

mod checkpoint;
mod head;
mod metrics;
mod report;
mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use head::{forward, loss, loss_and_gradient, sigmoid, softmax, HeadParams, Scores, HIDDEN_DIM};
pub use metrics::{
    confusion_for, evaluate, metrics_from_confusion, Aggregate, Averaging, ClassMetrics, ConfusionMatrix, EvalReport,
};
pub use report::{emit_report, parse_report_csv, render_csv, render_markdown, ReportRow, REPORT_COLUMNS};
pub use train::{
    mean_loss, train, train_with_evaluator, EpochLosses, Examples, Patience, StopReason, TrainingConfig,
    TrainingHistory, MAX_EPOCHS_CAP,
};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dimension error: {0}")]
    DimError(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("label index {target} out of range for {classes} classes")]
    LabelError { target: usize, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("confusion matrix has no counts")]
    EmptyConfusion,
    #[error("no reports to emit")]
    EmptyReport,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

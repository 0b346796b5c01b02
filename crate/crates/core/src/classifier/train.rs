use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::head::{forward, loss, loss_and_gradient, HeadParams};
use super::ClassifierError;
use crate::corpus::Mode;
use crate::encoder::Embedding;

/// Hard ceiling on training length.
pub const MAX_EPOCHS_CAP: usize = 1500;

/// Epochs without validation improvement tolerated before an early stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Patience {
    Epochs(usize),
    /// Never stop early.
    Infinite,
}

impl Serialize for Patience {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Patience::Epochs(n) => s.serialize_u64(*n as u64),
            Patience::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Patience {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Patience::Epochs(n as usize)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinite" | "none") => Ok(Patience::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid patience '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub max_epochs: usize,
    pub patience: Patience,
    /// Minimum `val_loss - train_loss` gap (nats) that counts as divergence.
    pub divergence_gap: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            max_epochs: MAX_EPOCHS_CAP,
            patience: Patience::Epochs(50),
            divergence_gap: 0.1,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 13,
            mode: Mode::Multiclass,
        }
    }
}

impl TrainingConfig {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.max_epochs == 0 || self.max_epochs > MAX_EPOCHS_CAP {
            v.push(format!("training.max_epochs must be in 1..={MAX_EPOCHS_CAP}, got {}", self.max_epochs));
        }
        if self.patience == Patience::Epochs(0) {
            v.push("training.patience must be >= 1 (or \"inf\")".into());
        }
        if !(self.divergence_gap > 0.0 && self.divergence_gap.is_finite()) {
            v.push(format!("training.divergence_gap must be > 0, got {}", self.divergence_gap));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            v.push(format!("training.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            v.push("training.batch_size must be >= 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ClassifierError::Config(v.join("; ")))
        }
    }
}

/// Embedded examples with class-index targets (`category_encoded` values).
#[derive(Debug, Clone, Default)]
pub struct Examples {
    pub inputs: Vec<Embedding>,
    pub targets: Vec<usize>,
}

impl Examples {
    pub fn new(inputs: Vec<Embedding>, targets: Vec<usize>) -> Result<Self, ClassifierError> {
        if inputs.len() != targets.len() {
            return Err(ClassifierError::DimError(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        Ok(Examples { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Mean loss of `head` over `examples`.
pub fn mean_loss(head: &HeadParams, examples: &Examples) -> Result<f64, ClassifierError> {
    if examples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mode = head.mode();
    let mut total = 0.0;
    for (x, &t) in examples.inputs.iter().zip(&examples.targets) {
        total += loss(&forward(head, x.as_slice())?, t, mode)?;
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyDivergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochLosses>,
    pub stop_reason: StopReason,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Adam with the usual (0.9, 0.999, 1e-8) constants.
struct Adam {
    lr: f64,
    step: i32,
    m: HeadParams,
    v: HeadParams,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, output_dim: usize) -> Result<Self, ClassifierError> {
        Ok(Adam { lr, step: 0, m: HeadParams::zeros(output_dim)?, v: HeadParams::zeros(output_dim)? })
    }

    fn update(&mut self, params: &mut HeadParams, grad: &HeadParams) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains the head with the default evaluation: mean loss over the full
/// train and validation sets after every epoch.
pub fn train(
    head: HeadParams,
    train_set: &Examples,
    val_set: &Examples,
    config: &TrainingConfig,
) -> Result<(HeadParams, TrainingHistory), ClassifierError> {
    train_with_evaluator(head, train_set, val_set, config, |_, h| {
        Ok((mean_loss(h, train_set)?, mean_loss(h, val_set)?))
    })
}

/// Mini-batch training with a caller-supplied per-epoch evaluation.
///
/// After epoch `e` the evaluator returns `(train_loss, val_loss)`. Training
/// stops after `max_epochs`, or early once `val_loss - train_loss` exceeds
/// the divergence gap while validation loss has not improved for `patience`
/// epochs. The returned parameters are the ones from `best_epoch`.
pub fn train_with_evaluator<F>(
    mut head: HeadParams,
    train_set: &Examples,
    val_set: &Examples,
    config: &TrainingConfig,
    mut evaluate: F,
) -> Result<(HeadParams, TrainingHistory), ClassifierError>
where
    F: FnMut(usize, &HeadParams) -> Result<(f64, f64), ClassifierError>,
{
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if head.mode() != config.mode {
        return Err(ClassifierError::DimError(format!(
            "head has {} outputs but config mode is {}",
            head.output_dim, config.mode
        )));
    }
    let k = head.output_dim;
    if let Some(&t) = train_set.targets.iter().chain(&val_set.targets).find(|&&t| t >= k) {
        return Err(ClassifierError::LabelError { target: t, classes: k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate, k)?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, HeadParams)> = None;
    let mut since_improvement = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut acc = HeadParams::zeros(k)?;
            for &i in batch {
                let (_, g) = loss_and_gradient(&head, train_set.inputs[i].as_slice(), train_set.targets[i])?;
                for (a, gi) in acc.tensors_mut().into_iter().zip(g.tensors()) {
                    a.iter_mut().zip(gi.iter()).for_each(|(a, g)| *a += g);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            acc.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|v| *v *= scale));
            adam.update(&mut head, &acc);
        }

        let (train_loss, val_loss) = evaluate(epoch, &head)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ClassifierError::NonFinite(format!("loss at epoch {epoch}")));
        }
        epochs.push(EpochLosses { epoch, train_loss, val_loss });

        let improved = best.as_ref().is_none_or(|(_, b, _)| val_loss < *b);
        if improved {
            best = Some((epoch, val_loss, head.clone()));
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if let Patience::Epochs(p) = config.patience {
            if val_loss - train_loss > config.divergence_gap && since_improvement >= p {
                log::info!("early stop at epoch {epoch}: gap {:.4}, {since_improvement} epochs without improvement", val_loss - train_loss);
                stop_reason = StopReason::EarlyDivergence;
                break;
            }
        }
    }

    let (best_epoch, _, best_head) = best.expect("at least one epoch ran");
    Ok((best_head, TrainingHistory { epochs, stop_reason, best_epoch }))
}

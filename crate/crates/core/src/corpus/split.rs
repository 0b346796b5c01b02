use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Label, Result};

pub const DEFAULT_SPLIT_SEED: u64 = 13;

/// Train / validation / test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        let ok = parts.iter().all(|p| p.is_finite() && *p > 0.0) && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::RatioError(parts))
        }
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, val: 0.15, test: 0.15 }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Stratified, seeded partition into train / validation / test.
///
/// Each class is shuffled independently and cut at `round(n * ratio)`, so the
/// per-class count of every part is within one of its ideal share. Entries
/// keep their original relative order inside each part.
pub fn split(ds: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, e) in ds.entries().iter().enumerate() {
        let label = e.label.ok_or_else(|| CorpusError::MissingLabel(e.id.clone()))?;
        by_class.entry(label).or_default().push(i);
    }
    if let Some((&label, idx)) = by_class.iter().find(|(_, idx)| idx.len() < 3) {
        return Err(CorpusError::StratifyError { label, count: idx.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 0 = train, 1 = val, 2 = test
    let mut part = vec![0u8; ds.len()];
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = ((n as f64) * ratios.train).round() as usize;
        let n_val = (((n as f64) * ratios.val).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        for (k, &i) in idx.iter().enumerate() {
            part[i] = if k < n_train {
                0
            } else if k < n_train + n_val {
                1
            } else {
                2
            };
        }
    }

    let pick = |which: u8, suffix: &str| {
        let entries = ds
            .entries()
            .iter()
            .zip(&part)
            .filter(|(_, &p)| p == which)
            .map(|(e, _)| e.clone())
            .collect();
        Dataset::new(format!("{}-{suffix}", ds.name()), ds.mode(), entries)
    };
    Ok(Split { train: pick(0, "train")?, val: pick(1, "val")?, test: pick(2, "test")? })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::with_counts;
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_partition() {
        let ds = with_counts(&[(Label::Ironia, 30), (Label::Neutro, 40)]);
        let a = split(&ds, SplitRatios::default(), 7).unwrap();
        let b = split(&ds, SplitRatios::default(), 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
        let c = split(&ds, SplitRatios::default(), 8).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn bad_ratios() {
        assert!(matches!(SplitRatios::new(0.5, 0.5, 0.5), Err(CorpusError::RatioError(_))));
        assert!(matches!(SplitRatios::new(1.0, 0.0, 0.0), Err(CorpusError::RatioError(_))));
        let ds = with_counts(&[(Label::Ironia, 10)]);
        let bad = SplitRatios { train: 0.5, val: 0.5, test: 0.5 };
        assert!(matches!(split(&ds, bad, 1), Err(CorpusError::RatioError(_))));
    }

    #[test]
    fn tiny_class_cannot_be_stratified() {
        let ds = with_counts(&[(Label::Ironia, 10), (Label::Positivo, 2)]);
        assert!(matches!(
            split(&ds, SplitRatios::default(), 1),
            Err(CorpusError::StratifyError { label: Label::Positivo, count: 2 })
        ));
    }

    #[test]
    fn balanced_thousand_is_proportional() {
        let ds = with_counts(&[
            (Label::Ironia, 250),
            (Label::Negativo, 250),
            (Label::Neutro, 250),
            (Label::Positivo, 250),
        ]);
        let ratios = SplitRatios::default();
        let s = split(&ds, ratios, DEFAULT_SPLIT_SEED).unwrap();
        for (part, r) in [(&s.train, ratios.train), (&s.val, ratios.val), (&s.test, ratios.test)] {
            // counting oracle over the emitted partition
            for &label in Label::MULTICLASS.iter() {
                let n = part.entries().iter().filter(|e| e.label == Some(label)).count() as f64;
                assert!((n - 250.0 * r).abs() <= 1.0, "{label} {n} vs {}", 250.0 * r);
            }
        }
        let ids: HashSet<&str> = s
            .train
            .entries()
            .iter()
            .chain(s.val.entries())
            .chain(s.test.entries())
            .map(|e| e.id.as_str())
            .collect();
        assert_eq!(ids.len(), 1000);
    }
}

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::Mode;
use crate::encoder::EMBEDDING_DIM;

pub const HIDDEN_DIM: usize = 50;

/// Feed-forward head: 768 → ReLU(50) → output_dim.
///
/// `w1` is row-major `768 × 50` (`w1[i * 50 + j]`), `w2` is row-major
/// `50 × output_dim`. Two output nodes mean the binary (sigmoid) head, four
/// the multiclass (softmax) head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

fn check_dim(output_dim: usize) -> Result<Mode, ClassifierError> {
    match output_dim {
        4 => Ok(Mode::Multiclass),
        2 => Ok(Mode::Binary),
        other => Err(ClassifierError::DimError(format!("output_dim must be 2 or 4, got {other}"))),
    }
}

impl HeadParams {
    /// All-zero parameters.
    pub fn zeros(output_dim: usize) -> Result<Self, ClassifierError> {
        check_dim(output_dim)?;
        Ok(HeadParams {
            output_dim,
            w1: vec![0.0; EMBEDDING_DIM * HIDDEN_DIM],
            b1: vec![0.0; HIDDEN_DIM],
            w2: vec![0.0; HIDDEN_DIM * output_dim],
            b2: vec![0.0; output_dim],
        })
    }

    /// Symmetric uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(output_dim: usize, seed: u64) -> Result<Self, ClassifierError> {
        let mut head = Self::zeros(output_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = 1.0 / (EMBEDDING_DIM as f64).sqrt();
        head.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        let a2 = 1.0 / (HIDDEN_DIM as f64).sqrt();
        head.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        Ok(head)
    }

    pub fn mode(&self) -> Mode {
        check_dim(self.output_dim).expect("validated on construction")
    }

    /// Checks shapes and finiteness (used after deserialization).
    pub fn validate(&self) -> Result<(), ClassifierError> {
        check_dim(self.output_dim)?;
        let shapes = [
            (self.w1.len(), EMBEDDING_DIM * HIDDEN_DIM, "W1"),
            (self.b1.len(), HIDDEN_DIM, "b1"),
            (self.w2.len(), HIDDEN_DIM * self.output_dim, "W2"),
            (self.b2.len(), self.output_dim, "b2"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(ClassifierError::DimError(format!("{name} has {got} values, expected {want}")));
            }
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(ClassifierError::NonFinite("parameters".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub logits: Vec<f64>,
    /// Softmax distribution (multiclass) or per-node sigmoids (binary).
    pub probs: Vec<f64>,
}

impl Scores {
    /// Highest-scoring class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    scores: Scores,
}

fn check_input(x: &[f64]) -> Result<(), ClassifierError> {
    if x.len() != EMBEDDING_DIM {
        return Err(ClassifierError::DimError(format!("input has {} values, expected {EMBEDDING_DIM}", x.len())));
    }
    Ok(())
}

fn activations(head: &HeadParams, x: &[f64]) -> Activations {
    let mut pre = head.b1.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &head.w1[i * HIDDEN_DIM..(i + 1) * HIDDEN_DIM];
        for (p, &w) in pre.iter_mut().zip(row) {
            *p += xi * w;
        }
    }
    let hidden: Vec<f64> = pre.iter().map(|&a| a.max(0.0)).collect();
    let k = head.output_dim;
    let mut logits = head.b2.clone();
    for (j, &h) in hidden.iter().enumerate() {
        let row = &head.w2[j * k..(j + 1) * k];
        for (z, &w) in logits.iter_mut().zip(row) {
            *z += h * w;
        }
    }
    let probs = match head.mode() {
        Mode::Multiclass => softmax(&logits),
        Mode::Binary => logits.iter().map(|&z| sigmoid(z)).collect(),
    };
    Activations { pre, hidden, scores: Scores { logits, probs } }
}

pub fn forward(head: &HeadParams, x: &[f64]) -> Result<Scores, ClassifierError> {
    check_input(x)?;
    Ok(activations(head, x).scores)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss of one prediction against class index `target`.
///
/// Multiclass: `-ln softmax(z)[target]`. Binary: mean over the two sigmoid
/// nodes of the binary cross-entropy against the one-hot target. Both are
/// evaluated from the logits, so they stay finite for saturated outputs.
pub fn loss(scores: &Scores, target: usize, mode: Mode) -> Result<f64, ClassifierError> {
    let k = scores.logits.len();
    if target >= k || k != mode.num_classes() {
        return Err(ClassifierError::LabelError { target, classes: k });
    }
    let z = &scores.logits;
    Ok(match mode {
        Mode::Multiclass => {
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            lse - z[target]
        }
        Mode::Binary => {
            z.iter()
                .enumerate()
                .map(|(c, &zc)| softplus(zc) - if c == target { zc } else { 0.0 })
                .sum::<f64>()
                / k as f64
        }
    })
}

/// Loss and its gradient with respect to every parameter for one example.
/// The gradient is returned in a `HeadParams` of the same shape.
pub fn loss_and_gradient(head: &HeadParams, x: &[f64], target: usize) -> Result<(f64, HeadParams), ClassifierError> {
    check_input(x)?;
    let mode = head.mode();
    let act = activations(head, x);
    let value = loss(&act.scores, target, mode)?;
    let k = head.output_dim;

    // dL/dz: softmax cross-entropy gives p - y; the two-node mean BCE gives (sigma - y) / k.
    let dz: Vec<f64> = act
        .scores
        .probs
        .iter()
        .enumerate()
        .map(|(c, &p)| {
            let y = if c == target { 1.0 } else { 0.0 };
            match mode {
                Mode::Multiclass => p - y,
                Mode::Binary => (p - y) / k as f64,
            }
        })
        .collect();

    let mut grad = HeadParams::zeros(k)?;
    grad.b2.copy_from_slice(&dz);
    let mut da = vec![0.0; HIDDEN_DIM];
    for j in 0..HIDDEN_DIM {
        let row = &head.w2[j * k..(j + 1) * k];
        let grow = &mut grad.w2[j * k..(j + 1) * k];
        let mut dh = 0.0;
        for c in 0..k {
            grow[c] = act.hidden[j] * dz[c];
            dh += row[c] * dz[c];
        }
        da[j] = if act.pre[j] > 0.0 { dh } else { 0.0 };
    }
    grad.b1.copy_from_slice(&da);
    for (i, &xi) in x.iter().enumerate() {
        let grow = &mut grad.w1[i * HIDDEN_DIM..(i + 1) * HIDDEN_DIM];
        for (g, &d) in grow.iter_mut().zip(&da) {
            *g = xi * d;
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = HeadParams::init(4, 99).unwrap();
        let b = HeadParams::init(4, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.b1.iter().chain(&a.b2).all(|&v| v == 0.0));
        assert_ne!(a, HeadParams::init(4, 100).unwrap());
        let bin = HeadParams::init(2, 1).unwrap();
        assert_eq!(bin.w2.len(), HIDDEN_DIM * 2);
        assert_eq!(bin.w1.len(), 768 * 50);
        assert!(bin.validate().is_ok());
        assert!(matches!(HeadParams::init(3, 1), Err(ClassifierError::DimError(_))));
    }

    #[test]
    fn zero_head_outputs() {
        let x = input(1);
        let multi = forward(&HeadParams::zeros(4).unwrap(), &x).unwrap();
        assert_eq!(multi.probs, vec![0.25; 4]);
        let bin = forward(&HeadParams::zeros(2).unwrap(), &x).unwrap();
        assert_eq!(bin.probs, vec![0.5; 2]);
    }

    #[test]
    fn wrong_input_length() {
        let head = HeadParams::zeros(4).unwrap();
        assert!(matches!(forward(&head, &[0.0; 10]), Err(ClassifierError::DimError(_))));
    }

    /// Straight-line re-implementation of the affine / ReLU / output chain.
    fn oracle_forward(head: &HeadParams, x: &[f64]) -> Vec<f64> {
        let k = head.output_dim;
        let mut h = [0.0f64; HIDDEN_DIM];
        for j in 0..HIDDEN_DIM {
            let mut s = head.b1[j];
            for i in 0..EMBEDDING_DIM {
                s += x[i] * head.w1[i * HIDDEN_DIM + j];
            }
            h[j] = if s > 0.0 { s } else { 0.0 };
        }
        let mut z = vec![0.0; k];
        for c in 0..k {
            let mut s = head.b2[c];
            for j in 0..HIDDEN_DIM {
                s += h[j] * head.w2[j * k + c];
            }
            z[c] = s;
        }
        if k == 4 {
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            z.iter().map(|v| v.exp() / denom).collect()
        } else {
            z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect()
        }
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        for seed in 0..20 {
            for dim in [2, 4] {
                let mut head = HeadParams::init(dim, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
                head.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
                head.b2.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
                let x = input(seed + 7);
                let got = forward(&head, &x).unwrap().probs;
                let want = oracle_forward(&head, &x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_and_sigmoid_in_range() {
        for seed in 0..10 {
            let head = HeadParams::init(4, seed).unwrap();
            let s = forward(&head, &input(seed)).unwrap();
            assert!((s.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let head = HeadParams::init(2, seed).unwrap();
            let s = forward(&head, &input(seed)).unwrap();
            assert!(s.probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn loss_special_values() {
        let uniform = Scores { logits: vec![0.0; 4], probs: vec![0.25; 4] };
        assert!((loss(&uniform, 2, Mode::Multiclass).unwrap() - 4f64.ln()).abs() < 1e-15);
        let perfect = Scores { logits: vec![60.0, -60.0, -60.0, -60.0], probs: softmax(&[60.0, -60.0, -60.0, -60.0]) };
        assert!(loss(&perfect, 0, Mode::Multiclass).unwrap() <= 1e-9);
        let perfect_bin = Scores { logits: vec![-40.0, 40.0], probs: vec![sigmoid(-40.0), sigmoid(40.0)] };
        assert!(loss(&perfect_bin, 1, Mode::Binary).unwrap() <= 1e-9);
        assert!(matches!(loss(&uniform, 4, Mode::Multiclass), Err(ClassifierError::LabelError { .. })));
        assert!(matches!(loss(&uniform, 0, Mode::Binary), Err(ClassifierError::LabelError { .. })));
    }

    #[test]
    fn loss_matches_probability_formula() {
        for seed in 0..10 {
            let x = input(seed);
            let head = HeadParams::init(4, seed).unwrap();
            let s = forward(&head, &x).unwrap();
            let t = (seed % 4) as usize;
            assert!((loss(&s, t, Mode::Multiclass).unwrap() - (-s.probs[t].ln())).abs() < 1e-12);

            let head = HeadParams::init(2, seed).unwrap();
            let s = forward(&head, &x).unwrap();
            let t = (seed % 2) as usize;
            let y = |c: usize| if c == t { 1.0 } else { 0.0 };
            let bce: f64 = (0..2).map(|c| -(y(c) * s.probs[c].ln() + (1.0 - y(c)) * (1.0 - s.probs[c]).ln())).sum::<f64>() / 2.0;
            assert!((loss(&s, t, Mode::Binary).unwrap() - bce).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ties_and_shift_invariance() {
        let s = Scores { logits: vec![1.0, 1.0], probs: vec![0.5, 0.5] };
        assert_eq!(s.argmax(), 0);
        let mut head = HeadParams::init(4, 3).unwrap();
        let x = input(3);
        let before = forward(&head, &x).unwrap().argmax();
        head.b2.iter_mut().for_each(|b| *b += 17.5);
        assert_eq!(forward(&head, &x).unwrap().argmax(), before);
    }
}

//! Checkpoint-free encoder: a keyed hash expanded into a unit vector.
//!
//! key = FNV-1a-64 of the whitespace-normalized UTF-8 text; component `i`
//! (0-based) is `splitmix64_mix(key + (i + 1) * GOLDEN)` mapped to [-1, 1)
//! through its top 53 bits; the vector is then L2-normalized. Everything is
//! fixed-width integer arithmetic plus IEEE doubles, so the output is the same
//! on every platform.

use super::{Embedding, EncoderError, EMBEDDING_DIM};
use crate::util::{fnv1a64, normalize_whitespace};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stub_embed(text: &str) -> Result<Embedding, EncoderError> {
    let normalized = normalize_whitespace(text);
    if normalized.is_empty() {
        return Err(EncoderError::EmptyText);
    }
    let key = fnv1a64(normalized.as_bytes());
    let mut values: Vec<f64> = (0..EMBEDDING_DIM as u64)
        .map(|i| {
            let z = splitmix64_mix(key.wrapping_add((i + 1).wrapping_mul(GOLDEN)));
            (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    Embedding::new(values)
}

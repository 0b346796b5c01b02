use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::head::HeadParams;
use super::ClassifierError;
use crate::corpus::Mode;
use crate::encoder::Pooling;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IRNHEAD1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub output_dim: usize,
    pub mode: Mode,
    pub encoder_id: String,
    pub pooling: Pooling,
    pub seed: u64,
}

/// Layout: magic, u32 LE header length, JSON header, then W1, b1, W2, b2
/// as little-endian f64.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    head: &HeadParams,
    encoder_id: &str,
    pooling: Pooling,
    seed: u64,
) -> Result<(), ClassifierError> {
    head.validate()?;
    let header = CheckpointHeader {
        output_dim: head.output_dim,
        mode: head.mode(),
        encoder_id: encoder_id.to_string(),
        pooling,
        seed,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ClassifierError::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(12 + json.len() + head.num_params() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in head.tensors() {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, HeadParams), ClassifierError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| ClassifierError::Format(format!("checkpoint: {m}"));
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body_start = 12 + hlen;
    if bytes.len() < body_start {
        return Err(bad("truncated header"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[12..body_start]).map_err(|e| ClassifierError::Format(e.to_string()))?;
    let mut head = HeadParams::zeros(header.output_dim)?;
    if head.mode() != header.mode {
        return Err(bad("mode does not match output_dim"));
    }
    let body = &bytes[body_start..];
    if body.len() != head.num_params() * 8 {
        return Err(bad(&format!("expected {} weight bytes, found {}", head.num_params() * 8, body.len())));
    }
    let mut values = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    for t in head.tensors_mut() {
        t.iter_mut().for_each(|v| *v = values.next().expect("length checked"));
    }
    head.validate()?;
    Ok((header, head))
}

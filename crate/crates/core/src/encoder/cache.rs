use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Embedding, EncoderError, Pooling, EMBEDDING_DIM};

/// JSON sidecar describing a binary embedding matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub encoder_id: String,
    pub pooling: Pooling,
    pub count: usize,
    pub dim: usize,
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `count × 768` little-endian f64 values to `path` and the sidecar
/// next to it (same stem, `.json`).
pub fn write_embeddings(
    path: impl AsRef<Path>,
    encoder_id: &str,
    pooling: Pooling,
    vectors: &[Embedding],
) -> Result<EmbeddingSidecar, EncoderError> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    for v in vectors {
        for x in v.as_slice() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    let sidecar = EmbeddingSidecar { encoder_id: encoder_id.to_string(), pooling, count: vectors.len(), dim: EMBEDDING_DIM };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| EncoderError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(sidecar)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddingSidecar, Vec<Embedding>), EncoderError> {
    let path = path.as_ref();
    let sidecar: EmbeddingSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| EncoderError::Format(e.to_string()))?;
    if sidecar.dim != EMBEDDING_DIM {
        return Err(EncoderError::Format(format!("dim {} != {EMBEDDING_DIM}", sidecar.dim)));
    }
    let expected = sidecar.count * sidecar.dim * 8;
    let mut bytes = Vec::with_capacity(expected);
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(EncoderError::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let vectors = bytes
        .chunks_exact(sidecar.dim * 8)
        .map(|row| Embedding::new(row.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((sidecar, vectors))
}

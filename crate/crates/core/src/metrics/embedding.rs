//! Externally computed embedding vectors.
//!
//! Two file forms are accepted:
//! * JSON `{"image_id": "...", "dim": N, "values": [...]}`
//! * binary: the 4 bytes `FEMB`, `dim` as little-endian u32, then `dim`
//!   little-endian f32 values. The image id is the file stem.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"FEMB";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub image_id: String,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(image_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let v = Self {
            image_id: image_id.into(),
            dim: values.len(),
            values,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(MetricsError::Embedding("dim must be > 0".into()));
        }
        if self.values.len() != self.dim {
            return Err(MetricsError::Embedding(format!(
                "dim {} but {} values",
                self.dim,
                self.values.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(MetricsError::Embedding(format!("value {i} is not finite")));
        }
        Ok(())
    }
}

/// Parses either form; `fallback_id` names binary vectors.
pub fn parse_embedding(bytes: &[u8], fallback_id: &str) -> Result<EmbeddingVector> {
    if let Some(rest) = bytes.strip_prefix(EMBEDDING_MAGIC.as_slice()) {
        if rest.len() < 4 {
            return Err(MetricsError::Embedding("truncated header".into()));
        }
        let dim = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let body = &rest[4..];
        if body.len() != dim * 4 {
            return Err(MetricsError::Embedding(format!(
                "dim {dim} needs {} bytes, found {}",
                dim * 4,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        return EmbeddingVector::new(fallback_id, values);
    }
    let v: EmbeddingVector =
        serde_json::from_slice(bytes).map_err(|e| MetricsError::Embedding(e.to_string()))?;
    v.validate()?;
    Ok(v)
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingVector> {
    let bytes = std::fs::read(path).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    parse_embedding(&bytes, stem)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn save_embedding_json(path: &Path, v: &EmbeddingVector) -> Result<()> {
    let text = serde_json::to_vec(v).map_err(|e| MetricsError::Embedding(e.to_string()))?;
    write(path, &text)
}

/// Values are narrowed to f32.
pub fn save_embedding_binary(path: &Path, v: &EmbeddingVector) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 4 * v.dim);
    bytes.extend_from_slice(EMBEDDING_MAGIC);
    bytes.extend_from_slice(&(v.dim as u32).to_le_bytes());
    for x in &v.values {
        bytes.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    write(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_uses_stem() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s1_gen.bin");
        let v = EmbeddingVector::new("ignored", vec![0.5, -1.25, 3.0]).unwrap();
        save_embedding_binary(&p, &v).unwrap();
        let back = load_embedding(&p).unwrap();
        assert_eq!(back.image_id, "s1_gen");
        assert_eq!(back.values, v.values);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        let v = EmbeddingVector::new("img", vec![0.1, 0.2]).unwrap();
        save_embedding_json(&p, &v).unwrap();
        assert_eq!(load_embedding(&p).unwrap(), v);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(parse_embedding(br#"{"image_id":"a","dim":3,"values":[1,2]}"#, "x").is_err());
        assert!(parse_embedding(br#"{"image_id":"a","dim":0,"values":[]}"#, "x").is_err());
        let mut b = EMBEDDING_MAGIC.to_vec();
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&1f32.to_le_bytes());
        assert!(parse_embedding(&b, "x").is_err());
        b.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(parse_embedding(&b, "x").is_err());
    }
}

//! Versioned binary checkpoints: a JSON header (config, metadata, tensor
//! manifest) followed by one little-endian f64 blob.
//!
//! Layout: 8-byte magic `QGCKPT01`, little-endian u64 header length, the
//! header JSON, then every tensor's data back to back in manifest order.
//! Serialization is canonical (sorted JSON maps, manifest in insertion
//! order), so save → load → save reproduces the file byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QGCKPT01";

/// Sanity bound on the header (1 GiB) to reject corrupt length fields.
const MAX_HEADER_BYTES: u64 = 1 << 30;

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: Value,
    meta: Value,
    tensors: Vec<ManifestEntry>,
}

/// Everything a checkpoint stores: an arbitrary JSON `config` (model
/// architecture), an arbitrary JSON `meta` (optimizer step, RNG state,
/// normalization constants, …), and the named tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub config: Value,
    pub meta: Value,
    pub tensors: Vec<(String, Tensor)>,
}

pub fn save_checkpoint(path: &Path, data: &CheckpointData) -> Result<()> {
    let mut manifest = Vec::with_capacity(data.tensors.len());
    let mut offset = 0usize;
    for (name, t) in &data.tensors {
        manifest.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
            len: t.numel(),
        });
        offset += t.numel();
    }
    let header = Header {
        config: data.config.clone(),
        meta: data.meta.clone(),
        tensors: manifest,
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

    let mut out = Vec::with_capacity(16 + header_bytes.len() + offset * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in &data.tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&out).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 16 || &bytes[0..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if header_len > MAX_HEADER_BYTES || 16 + header_len as usize > bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{}: header length {header_len} exceeds file size",
            path.display()
        )));
    }
    let header_end = 16 + header_len as usize;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Checkpoint(format!("{}: header: {e}", path.display())))?;

    let blob = &bytes[header_end..];
    let total: usize = header.tensors.iter().map(|e| e.len).sum();
    if blob.len() != total * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: blob holds {} bytes, manifest expects {}",
            path.display(),
            blob.len(),
            total * 8
        )));
    }
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        let numel: usize = e.shape.iter().product();
        if numel != e.len {
            return Err(Error::Checkpoint(format!(
                "{}: tensor '{}' shape {:?} vs stored length {}",
                path.display(),
                e.name,
                e.shape,
                e.len
            )));
        }
        let start = e.offset * 8;
        let end = start + e.len * 8;
        if end > blob.len() {
            return Err(Error::Checkpoint(format!(
                "{}: tensor '{}' extends past the blob",
                path.display(),
                e.name
            )));
        }
        let data: Vec<f64> = blob[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
    }
    Ok(CheckpointData {
        config: header.config,
        meta: header.meta,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> CheckpointData {
        CheckpointData {
            config: json!({"d_model": 32, "kind": "demo"}),
            meta: json!({"step": 17, "rng": {"seed": 42, "word_pos": [0, 128]}}),
            tensors: vec![
                (
                    "w1".into(),
                    Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-300, -0.125]).unwrap(),
                ),
                ("b".into(), Tensor::new(vec![3], vec![0.5, 0.5, -0.5]).unwrap()),
            ],
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = std::env::temp_dir().join("qgckpt_test_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.ckpt");
        let p2 = dir.join("b.ckpt");
        let data = sample();
        save_checkpoint(&p1, &data).unwrap();
        let loaded = load_checkpoint(&p1).unwrap();
        assert_eq!(loaded, data);
        save_checkpoint(&p2, &loaded).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(bytes1, bytes2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = std::env::temp_dir().join("qgckpt_test_corrupt");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.ckpt");
        save_checkpoint(&p, &sample()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();

        // Bad magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Checkpoint(_))));

        // Truncated blob.
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Checkpoint(_))));

        // Missing file → Io error.
        let missing = dir.join("nope.ckpt");
        assert!(matches!(load_checkpoint(&missing), Err(Error::Io { .. })));
        std::fs::remove_dir_all(&dir).ok();
    }
}

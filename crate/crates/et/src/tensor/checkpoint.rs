//! Checkpoint archive: named parameters with a JSON config header.
//!
//! Layout: magic, little-endian u64 header length, UTF-8 JSON header, then
//! each tensor's payload as little-endian f64 in header order. Round-trips
//! are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Tensor, TensorError};

const MAGIC: &[u8; 8] = b"ETCKPT1\n";

#[derive(Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

/// A loaded checkpoint: model config plus named tensors in archive order.
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn save_checkpoint(
    path: &Path,
    config: &serde_json::Value,
    tensors: &[(String, &Tensor)],
) -> Result<(), TensorError> {
    let header = Header {
        config: config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| Entry {
                name: name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| TensorError::Checkpoint(format!("header encode: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, t) in tensors {
        for &v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TensorError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut header_bytes = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| TensorError::Checkpoint(format!("header decode: {e}")))?;

    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let numel: usize = entry.shape.iter().product();
        let mut raw = vec![0u8; numel * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((entry.name, Tensor::new(data, entry.shape)?));
    }
    Ok(Checkpoint {
        config: header.config,
        tensors,
    })
}

//! Model checkpoint I/O.
//!
//! Layout (little-endian):
//!
//! ```text
//! "NGFW"  4 magic bytes
//! u64     JSON header length
//! bytes   header: {"hyper": {...}, "params": [{"name", "shape"}, ...]}
//! f64[..] parameter values concatenated in header order
//! ```
//!
//! Values round-trip bit-exactly.

use super::params::ParamSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"NGFW";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    hyper: serde_json::Value,
    params: Vec<ParamMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint(path: &Path, hyper: &serde_json::Value, params: &ParamSet) -> Result<()> {
    let header = Header {
        hyper: hyper.clone(),
        params: params
            .iter()
            .map(|p| ParamMeta { name: p.name.clone(), shape: p.shape.clone() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    let mut buf = Vec::with_capacity(params.total_values() * 8);
    for p in params.iter() {
        for &v in &p.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(serde_json::Value, ParamSet)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(Error::InvalidData(format!("{}: not a checkpoint", path.display())));
    }
    let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(Error::InvalidData("checkpoint truncated in header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])?;
    let mut off = 12 + header_len;
    let mut params = ParamSet::new();
    for meta in header.params {
        let count: usize = meta.shape.iter().product();
        if bytes.len() < off + count * 8 {
            return Err(Error::InvalidData(format!(
                "checkpoint truncated in parameter {}",
                meta.name
            )));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        params.add(meta.name, meta.shape, values);
    }
    if off != bytes.len() {
        return Err(Error::InvalidData("trailing bytes in checkpoint".into()));
    }
    Ok((header.hyper, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ngfw");
        let mut params = ParamSet::new();
        params.add("w", vec![2, 3], vec![0.1, -0.2, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -0.0]);
        params.add("b", vec![1], vec![std::f64::consts::PI]);
        let hyper = serde_json::json!({"feature_dim": 8, "blocks": 2});
        save_checkpoint(&path, &hyper, &params).unwrap();
        let (h2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(h2["feature_dim"], 8);
        assert_eq!(params, p2);
        // Bit-level comparison, including the negative zero.
        for (a, b) in params.iter().zip(p2.iter()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ngfw");
        std::fs::write(&path, b"nope").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}

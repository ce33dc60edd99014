//! `SVOL1` tensor container: magic, little-endian `u32` rank and dims, `f32`
//! payload, trailing CRC32 of everything before it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

pub const MAGIC: &[u8; 5] = b"SVOL1";

pub fn encode(t: &Tensor<f32>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(MAGIC.len() + 4 * (1 + t.rank() + t.len()) + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let format = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let truncated = |detail: String| Error::Truncated {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(format("bad magic".into()));
    }
    let mut pos = MAGIC.len();
    let mut word = |what: &str| -> Result<u32> {
        let b = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| truncated(format!("header ends before {what}")))?;
        pos += 4;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    };
    let rank = word("rank")? as usize;
    if rank > 8 {
        return Err(format(format!("implausible rank {rank}")));
    }
    let shape = (0..rank)
        .map(|i| word(&format!("dim {i}")).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = MAGIC.len() + 4 * (1 + rank);
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format(format!("dims {shape:?} overflow")))?;
    let expected = n
        .checked_mul(4)
        .and_then(|p| p.checked_add(header + 4))
        .ok_or_else(|| format(format!("dims {shape:?} overflow")))?;
    if bytes.len() != expected {
        return Err(truncated(format!(
            "dims {shape:?} need {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let body = &bytes[..expected - 4];
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let data = body[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::from_vec(&shape, data)
}

pub fn svol_write(path: &Path, t: &Tensor<f32>) -> Result<()> {
    fs::write(path, encode(t)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn svol_read(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes, path)
}

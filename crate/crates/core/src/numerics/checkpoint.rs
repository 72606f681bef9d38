//! Binary container of named tensors with a JSON manifest alongside.
//!
//! Layout (little endian): magic `CBTCKPT1`, `u32` tensor count, then per
//! tensor `u32` name length, UTF-8 name, `u32` rank, `u64` per dimension and
//! the row-major `f64` values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Parameter, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CBTCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset of the first value in the binary file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub tensors: Vec<TensorEntry>,
    pub bytes: usize,
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub(crate) fn encode(tensors: &[(&str, &Tensor)]) -> (Vec<u8>, CheckpointManifest) {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut entries = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: buf.len(),
        });
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: "cbtnlu-checkpoint-v1".into(),
        tensors: entries,
        bytes: buf.len(),
    };
    (buf, manifest)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("checkpoint truncated at byte {}", self.pos),
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub(crate) fn decode(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let bad = |message: &str| Error::Parse {
        line: 0,
        message: message.to_string(),
    };
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| bad("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != buf.len() {
        return Err(bad("trailing bytes after last tensor"));
    }
    Ok(out)
}

/// Writes `path` and `path.json`.
pub fn save_checkpoint(path: impl AsRef<Path>, params: &[Parameter]) -> Result<CheckpointManifest> {
    let path = path.as_ref();
    let named: Vec<(&str, &Tensor)> = params.iter().map(|p| (p.name.as_str(), &p.value)).collect();
    let (bytes, manifest) = encode(&named);
    fs::write(path, bytes)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Reads the tensors of a checkpoint, cross-checking the manifest when present.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let tensors = decode(&bytes)?;
    let mpath = manifest_path(path);
    if mpath.exists() {
        let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(mpath)?)?;
        let consistent = manifest.bytes == bytes.len()
            && manifest.tensors.len() == tensors.len()
            && manifest
                .tensors
                .iter()
                .zip(&tensors)
                .all(|(e, (n, t))| &e.name == n && e.shape == t.shape());
        if !consistent {
            return Err(Error::Parse {
                line: 0,
                message: "checkpoint manifest does not match the tensor file".into(),
            });
        }
    }
    Ok(tensors)
}

//! Checkpoint container.
//!
//! All integers are little-endian.
//!
//! | offset    | size         | field                                   |
//! |-----------|--------------|-----------------------------------------|
//! | 0         | 8            | magic `CAILCKPT`                        |
//! | 8         | 4            | format version, `u32` (currently 1)     |
//! | 12        | 8            | header length `H`, `u64`                |
//! | 20        | `H`          | header, UTF-8 JSON with sorted keys     |
//! | 20 + `H`  | 4            | block count `B`, `u32`                  |
//!
//! followed by `B` parameter blocks, each
//!
//! | size          | field                              |
//! |---------------|------------------------------------|
//! | 4             | name length `N`, `u32`             |
//! | `N`           | name, UTF-8                        |
//! | 8             | rows, `u64`                        |
//! | 8             | cols, `u64`                        |
//! | 8·rows·cols   | values, `f64`, row-major           |
//!
//! The header holds the run configuration, the architecture, the selected
//! epoch, summary metrics and the final `λ₂` and `c`. Blocks appear in the
//! order the model creates its parameters; loading matches them by name.

use cail_core::diff::Matrix;
use cail_core::model::{CailModel, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Error;
use crate::json;

pub const MAGIC: &[u8; 8] = b"CAILCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub trained: bool,
    pub epochs_run: usize,
    /// Validation action log-likelihood of the stored parameters.
    pub val_loglik: Option<f64>,
    /// `Σ_i H(G^i)` of the stored templates.
    pub acyclicity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: RunConfig,
    pub model: ModelConfig,
    pub epoch: usize,
    pub metrics: CheckpointMetrics,
    pub lambda2: f64,
    pub c: f64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: CailModel,
}

pub fn encode(ck: &Checkpoint) -> Result<Vec<u8>, Error> {
    let header = json::to_line(&ck.header)?;
    let mut out = Vec::with_capacity(32 + header.len() + 8 * ck.model.store.total_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(ck.model.store.len() as u32).to_le_bytes());
    for (name, value) in ck.model.store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(value.cols() as u64).to_le_bytes());
        for v in value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, Error> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format(String::from("length overflows")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, Error> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Format(String::from("not a checkpoint (bad magic)")));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let header_len = cur.len()?;
    let header: CheckpointHeader =
        serde_json::from_slice(cur.take(header_len)?).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut model = CailModel::new(header.model.clone(), header.config.seed)?;
    let count = cur.u32()? as usize;
    if count != model.store.len() {
        return Err(Error::Format(format!("checkpoint holds {count} blocks, model expects {}", model.store.len())));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?).map_err(|_| Error::Format(String::from("block name is not UTF-8")))?;
        let id = model.store.find(name).ok_or_else(|| Error::Format(format!("unknown parameter block {name}")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(Error::Format(format!("parameter block {name} repeated")));
        }
        let (rows, cols) = (cur.len()?, cur.len()?);
        if model.store.get(id).shape() != (rows, cols) {
            return Err(Error::Format(format!("block {name} is {rows}×{cols}, expected {:?}", model.store.get(id).shape())));
        }
        let size = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| Error::Format(String::from("block too large")))?;
        let data = cur.take(size)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        *model.store.get_mut(id) = Matrix::from_vec(rows, cols, data);
    }
    if cur.at != bytes.len() {
        return Err(Error::Format(String::from("trailing bytes after the last block")));
    }
    Ok(Checkpoint { header, model })
}

pub fn load(path: &std::path::Path) -> Result<Checkpoint, Error> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

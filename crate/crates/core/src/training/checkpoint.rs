//! Binary checkpoint layout (little-endian):
//!
//! ```text
//! "MSS1"  u32 version  u32 tensor_count
//! per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], f32 data[prod(dims)]
//! u32 meta_len, meta (UTF-8 TOML: progress counters and the run configuration)
//! ```
//!
//! Parameter tensors use the names of [`ModelParams::names`]; Adam moments
//! follow as `<name>#adam_m` and `<name>#adam_v`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelParams;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MSS1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters with everything needed to resume or to separate.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: RunConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub rng_seed: u64,
    /// Position of the shuffling RNG stream.
    pub rng_word_pos: u128,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    epoch: usize,
    step: u64,
    rng_seed: String,
    rng_word_pos: String,
    adam_steps: u64,
    config: RunConfig,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let named = self.params.named();
        out.extend_from_slice(&(3 * named.len() as u32).to_le_bytes());
        for (name, p) in &named {
            write_tensor(&mut out, name, &p.value);
        }
        for (name, p) in &named {
            write_tensor(&mut out, &format!("{name}#adam_m"), &p.adam_m);
            write_tensor(&mut out, &format!("{name}#adam_v"), &p.adam_v);
        }
        let meta = Meta {
            epoch: self.epoch,
            step: self.step,
            rng_seed: self.rng_seed.to_string(),
            rng_word_pos: self.rng_word_pos.to_string(),
            adam_steps: named.first().map_or(0, |(_, p)| p.step_count),
            config: self.config.clone(),
        };
        let text = toml::to_string(&meta).expect("checkpoint metadata serialises");
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(r.error_at(0, "not a checkpoint (bad magic)"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error_at(4, &format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32("tensor count")?;
        let mut tensors: HashMap<String, Matrix> = HashMap::new();
        for _ in 0..count {
            let start = r.pos;
            let (name, m) = r.tensor()?;
            if tensors.insert(name.clone(), m).is_some() {
                return Err(r.error_at(start, &format!("duplicate tensor '{name}'")));
            }
        }
        let meta_start = r.pos;
        let meta_len = r.u32("metadata length")? as usize;
        let text = std::str::from_utf8(r.take(meta_len, "metadata")?)
            .map_err(|_| r.error_at(meta_start, "metadata is not UTF-8"))?;
        if r.pos != bytes.len() {
            return Err(r.error_at(r.pos, "trailing bytes after metadata"));
        }
        let meta: Meta =
            toml::from_str(text).map_err(|e| r.error_at(meta_start, &format!("metadata: {e}")))?;
        meta.config.validate()?;
        let rng_seed = meta
            .rng_seed
            .parse()
            .map_err(|_| r.error_at(meta_start, "rng_seed is not an integer"))?;
        let rng_word_pos = meta
            .rng_word_pos
            .parse()
            .map_err(|_| r.error_at(meta_start, "rng_word_pos is not an integer"))?;

        let mut params = ModelParams::zeros(meta.config.model);
        for (name, p) in ModelParams::names().into_iter().zip(params.parameters_mut()) {
            let value = tensors
                .remove(&name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor '{name}'")))?;
            if value.shape() != p.shape() {
                return Err(Error::Dimension(format!(
                    "tensor '{name}' is {:?}, configuration expects {:?}",
                    value.shape(),
                    p.shape()
                )));
            }
            p.value = value;
            for (suffix, slot) in [("adam_m", &mut p.adam_m), ("adam_v", &mut p.adam_v)] {
                if let Some(m) = tensors.remove(&format!("{name}#{suffix}")) {
                    if m.shape() != slot.shape() {
                        return Err(Error::Dimension(format!("tensor '{name}#{suffix}' has the wrong shape")));
                    }
                    *slot = m;
                }
            }
            p.step_count = meta.adam_steps;
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Format(format!("unexpected tensor '{extra}'")));
        }
        Ok(Checkpoint {
            params,
            config: meta.config,
            epoch: meta.epoch,
            step: meta.step,
            rng_seed,
            rng_word_pos,
        })
    }
}

fn write_tensor(out: &mut Vec<u8>, name: &str, m: &Matrix) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(2);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, msg: &str) -> Error {
        Error::Format(format!("checkpoint offset {offset}: {msg}"))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error_at(self.pos, &format!("truncated while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<(String, Matrix)> {
        let start = self.pos;
        let len = u16::from_le_bytes(self.take(2, "name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(self.take(len, "tensor name")?)
            .map_err(|_| self.error_at(start, "tensor name is not UTF-8"))?
            .to_string();
        let rank_at = self.pos;
        let rank = self.take(1, "rank")?[0];
        let dims = (0..rank)
            .map(|_| self.u32("dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let (rows, cols) = match dims[..] {
            [n] => (1, n),
            [r, c] => (r, c),
            _ => return Err(self.error_at(rank_at, &format!("tensor '{name}' has unsupported rank {rank}"))),
        };
        let count = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| self.error_at(rank_at, "tensor size overflows"))?;
        let data = self
            .take(count, &format!("data of '{name}'"))?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok((name, Matrix::from_vec(rows, cols, data)?))
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

//! Checkpoint file layout:
//!
//! ```text
//! #c2v-checkpoint 1\n
//! {json header}\n
//! parameters, then Adam m, then Adam v: f64 little-endian, tensor order
//! values, paths, transform, attention, tags
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::{ModelError, ModelParams};

pub const CHECKPOINT_HEADER: &str = "#c2v-checkpoint 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dim: usize,
    value_rows: usize,
    path_rows: usize,
    vocab_digest: String,
    adam_t: u64,
    adam: AdamConfig,
    meta: serde_json::Value,
}

/// Trained parameters plus everything needed to resume or audit them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub adam: AdamState,
    pub vocab_digest: String,
    /// Free-form provenance: training config, epoch, validation metrics.
    pub meta: serde_json::Value,
}

fn err(msg: impl std::fmt::Display) -> ModelError {
    ModelError::Checkpoint(msg.to_string())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let header = Header {
            dim: p.dim,
            value_rows: p.value_embeddings.rows,
            path_rows: p.path_embeddings.rows,
            vocab_digest: self.vocab_digest.clone(),
            adam_t: self.adam.t,
            adam: self.adam.config,
            meta: self.meta.clone(),
        };
        let mut out = Vec::with_capacity(24 * p.parameter_count() + 256);
        out.extend_from_slice(CHECKPOINT_HEADER.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(serde_json::to_string(&header).expect("header serializes").as_bytes());
        out.push(b'\n');
        for set in [p, &self.adam.m, &self.adam.v] {
            for tensor in set.tensors() {
                for x in tensor {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut reader = BufReader::new(reader);
        let mut line = String::new();
        reader.read_line(&mut line).map_err(err)?;
        if line.trim_end() != CHECKPOINT_HEADER {
            return Err(err(format!("expected `{CHECKPOINT_HEADER}` header")));
        }
        line.clear();
        reader.read_line(&mut line).map_err(err)?;
        let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| err(format!("bad header: {e}")))?;
        if header.dim == 0 || header.value_rows < 2 || header.path_rows < 2 {
            return Err(err("header dimensions out of range"));
        }

        let mut sets = Vec::with_capacity(3);
        let mut buf = [0u8; 8];
        for _ in 0..3 {
            let mut set = ModelParams::zeros(header.value_rows, header.path_rows, header.dim);
            for tensor in set.tensors_mut() {
                for x in tensor.iter_mut() {
                    reader.read_exact(&mut buf).map_err(|_| err("truncated tensor data"))?;
                    *x = f64::from_le_bytes(buf);
                }
            }
            sets.push(set);
        }
        if reader.read(&mut buf).map_err(err)? != 0 {
            return Err(err("trailing bytes after tensor data"));
        }
        let v = sets.pop().unwrap();
        let m = sets.pop().unwrap();
        let params = sets.pop().unwrap();
        Ok(Self {
            params,
            adam: AdamState { m, v, t: header.adam_t, config: header.adam },
            vocab_digest: header.vocab_digest,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut file = std::fs::File::create(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        file.write_all(&self.to_bytes()).map_err(|e| err(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let file = std::fs::File::open(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    /// Refuses a vocabulary other than the one the checkpoint was trained on.
    pub fn check_vocab(&self, digest: &str) -> Result<(), ModelError> {
        if self.vocab_digest == digest {
            Ok(())
        } else {
            Err(ModelError::VocabMismatch { expected: self.vocab_digest.clone(), found: digest.to_string() })
        }
    }

    pub fn load_for_vocab(path: &Path, digest: &str) -> Result<Self, ModelError> {
        let ckpt = Self::load(path)?;
        ckpt.check_vocab(digest)?;
        Ok(ckpt)
    }
}

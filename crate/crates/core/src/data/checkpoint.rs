//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "IRNF"
//! version u32
//! count   u32                      number of tensors
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   rank     u32
//!   extents  rank × u64
//!   data     numel × f32
//! meta_len u64, metadata JSON bytes (UTF-8)
//! checksum u64                     FNV-1a over all preceding bytes
//! ```
//!
//! Loads fully validate magic, version, structure, and checksum before any
//! state is handed out, so a failed load never leaves partial state behind.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::PoolKind;
use crate::models::{build_classifier, Classifier, HeadKind};
use crate::rng::{stream, tags};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IRNF";

/// Training provenance stored with the tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointMeta {
    pub stage: Option<u8>,
    pub pool: Option<String>,
    pub head: Option<String>,
    pub seed: Option<u64>,
    pub epoch: Option<usize>,
    pub num_classes: Option<usize>,
    pub input_width: Option<usize>,
    pub input_height: Option<usize>,
    /// Original dataset class ids used for training, when a class-disjoint
    /// protocol needs to reconstruct the held-out split.
    pub train_classes: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub tensors: Vec<(String, Tensor)>,
    pub meta: CheckpointMeta,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Checkpoint {
    pub fn new(tensors: Vec<(String, Tensor)>, meta: CheckpointMeta) -> Self {
        Checkpoint {
            version: FORMAT_VERSION,
            tensors,
            meta,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find_map(|(n, t)| (n == name).then_some(t))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, tensor) in &self.tensors {
            let nb = name.as_bytes();
            out.extend_from_slice(&(nb.len() as u32).to_le_bytes());
            out.extend_from_slice(nb);
            out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &e in tensor.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let meta = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let checksum = fnv1a64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                what: format!("bad magic {magic:?}, expected \"IRNF\""),
            });
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::CkptVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| {
                Error::Format {
                    offset: r.pos,
                    what: "tensor name is not UTF-8".into(),
                }
            })?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor::from_vec(shape, data)?));
        }
        let meta_len = r.u64()? as usize;
        let meta_bytes = r.take(meta_len)?.to_vec();
        let payload_end = r.pos;
        let stored = r.u64()?;
        let computed = fnv1a64(&bytes[..payload_end]);
        if stored != computed {
            return Err(Error::CkptChecksum { stored, computed });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                offset: r.pos,
                what: format!("{} trailing bytes after checksum", bytes.len() - r.pos),
            });
        }
        let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)?;
        Ok(Checkpoint {
            version,
            tensors,
            meta,
        })
    }

    /// Rebuild the classifier this checkpoint was saved from and load every
    /// tensor into it.
    pub fn build_classifier(&self) -> Result<Classifier> {
        let pool: PoolKind = self
            .meta
            .pool
            .as_deref()
            .ok_or_else(|| Error::State("checkpoint metadata lacks pooling kind".into()))?
            .parse()?;
        let head: HeadKind = self
            .meta
            .head
            .as_deref()
            .ok_or_else(|| Error::State("checkpoint metadata lacks head kind".into()))?
            .parse()?;
        let num_classes = self
            .meta
            .num_classes
            .ok_or_else(|| Error::State("checkpoint metadata lacks class count".into()))?;
        let width = self
            .meta
            .input_width
            .ok_or_else(|| Error::State("checkpoint metadata lacks input width".into()))?;
        let height = self
            .meta
            .input_height
            .ok_or_else(|| Error::State("checkpoint metadata lacks input height".into()))?;
        let mut rng = stream(0, tags::MODEL_INIT);
        let mut model = build_classifier(pool, head, num_classes, width, height, &mut rng)?;
        apply_to_classifier(self, &mut model)?;
        Ok(model)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.bytes.len(),
                what: format!(
                    "truncated checkpoint: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Write atomically: temp file in the target directory, then rename.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let tmp = path.with_extension("irnf.tmp");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes)
}

/// Load every model tensor from the checkpoint. Validates the complete
/// name/shape correspondence before mutating anything.
pub fn apply_to_classifier(ckpt: &Checkpoint, model: &mut Classifier) -> Result<()> {
    for (name, current) in model.state() {
        match ckpt.tensor(&name) {
            None => {
                return Err(Error::CkptShape {
                    name,
                    found: vec![],
                    expected: current.shape().to_vec(),
                })
            }
            Some(t) if t.shape() != current.shape() => {
                return Err(Error::CkptShape {
                    name,
                    found: t.shape().to_vec(),
                    expected: current.shape().to_vec(),
                });
            }
            _ => {}
        }
    }
    model.load_state(&ckpt.tensors)
}

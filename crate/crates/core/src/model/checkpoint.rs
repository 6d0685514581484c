//! Versioned checkpoint container.
//!
//! Layout: a UTF-8 header of `key = value` lines (magic line first,
//! `end-header` last) followed by binary records
//! `kind:u8 | name_len:u32 | name | ndim:u32 | dims:u32* | f32 LE payload`
//! where `kind` is 0 for parameter values and 1 for momentum buffers.

use std::collections::BTreeMap;
use std::path::Path;

use super::{BenthiqNet, ModelConfig};
use crate::error::{Error, Result};
use crate::kv;
use crate::tensor::Rng;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "BENTHIQ-CHECKPOINT";
const END: &str = "end-header";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub epoch: usize,
    pub params: Vec<TensorRecord>,
    pub momentum: Vec<TensorRecord>,
    /// Free-form run metadata (e.g. best validation score).
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Keep fresh initialization for parameters absent from the file.
    pub allow_partial: bool,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_model(model: &BenthiqNet, seed: u64, epoch: usize) -> Self {
        let mut params = Vec::new();
        let mut momentum = Vec::new();
        for p in model.params.iter() {
            params.push(TensorRecord {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                values: p.tensor.to_vec(),
            });
            momentum.push(TensorRecord {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                values: p.momentum.clone(),
            });
        }
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            seed,
            epoch,
            params,
            momentum,
            extra: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut pairs = vec![
            ("version".to_string(), self.version.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("epoch".to_string(), self.epoch.to_string()),
        ];
        pairs.extend(self.config.to_pairs());
        pairs.extend(self.extra.iter().map(|(k, v)| (format!("extra.{k}"), v.clone())));
        pairs.push((
            "records".to_string(),
            (self.params.len() + self.momentum.len()).to_string(),
        ));
        let mut out = format!("{MAGIC}\n{}{END}\n", kv::render(&pairs)).into_bytes();
        for (kind, recs) in [(0u8, &self.params), (1u8, &self.momentum)] {
            for r in recs.iter() {
                out.push(kind);
                out.extend((r.name.len() as u32).to_le_bytes());
                out.extend(r.name.as_bytes());
                out.extend((r.shape.len() as u32).to_le_bytes());
                for &d in &r.shape {
                    out.extend((d as u32).to_le_bytes());
                }
                for v in &r.values {
                    out.extend(v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let magic = format!("{MAGIC}\n");
        if !bytes.starts_with(magic.as_bytes()) {
            return Err(ckpt_err("not a checkpoint file (bad magic)"));
        }
        let end = format!("\n{END}\n");
        let hdr_end = bytes
            .windows(end.len())
            .position(|w| w == end.as_bytes())
            .ok_or_else(|| ckpt_err("truncated header (no end-header line)"))?;
        let header =
            std::str::from_utf8(&bytes[magic.len()..hdr_end + 1]).map_err(|_| ckpt_err("header is not UTF-8"))?;
        let map = kv::parse(header)?;
        let version: u32 = kv::get_parsed(&map, "version")?.ok_or_else(|| ckpt_err("missing version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(ckpt_err(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let seed = kv::get_parsed(&map, "seed")?.ok_or_else(|| ckpt_err("missing seed"))?;
        let epoch = kv::get_parsed(&map, "epoch")?.ok_or_else(|| ckpt_err("missing epoch"))?;
        let count: usize = kv::get_parsed(&map, "records")?.ok_or_else(|| ckpt_err("missing record count"))?;
        let config = ModelConfig::from_map(&map, ModelConfig::swin_t())?;
        let extra = map
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("extra.").map(|k| (k.to_string(), v.clone())))
            .collect();

        let mut r = Reader {
            bytes,
            pos: hdr_end + end.len(),
        };
        let mut params = Vec::new();
        let mut momentum = Vec::new();
        for _ in 0..count {
            let at = r.pos;
            let kind = r.take(1)?[0];
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| ckpt_err(format!("record name at byte {at} is not UTF-8")))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let values = r
                .take(n * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let rec = TensorRecord { name, shape, values };
            match kind {
                0 => params.push(rec),
                1 => momentum.push(rec),
                k => return Err(ckpt_err(format!("unknown record kind {k} at byte {at}"))),
            }
        }
        if r.pos != bytes.len() {
            return Err(ckpt_err(format!(
                "{} trailing bytes after records",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            version,
            config,
            seed,
            epoch,
            params,
            momentum,
            extra,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Builds a model of the stored configuration holding the stored weights.
    pub fn to_model(&self) -> Result<BenthiqNet> {
        let mut model = BenthiqNet::build(&self.config, &mut Rng::new(self.seed))?;
        model.load_state(self, LoadOptions::default())?;
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
            return Err(ckpt_err(format!(
                "truncated file: need {n} bytes at byte {}, {} available",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl BenthiqNet {
    /// Copies weights (and momentum buffers) from a checkpoint. Returns the
    /// names that were loaded.
    pub fn load_state(&mut self, ckpt: &Checkpoint, opts: LoadOptions) -> Result<Vec<String>> {
        let (a, b) = (&self.config, &ckpt.config);
        if a.num_classes != b.num_classes {
            return Err(Error::Config(format!(
                "checkpoint has {} classes, model expects {}",
                b.num_classes, a.num_classes
            )));
        }
        if a != b {
            return Err(Error::Config(format!(
                "checkpoint architecture {:?} does not match model {:?}",
                b.to_pairs(),
                a.to_pairs()
            )));
        }
        let momentum: BTreeMap<&str, &TensorRecord> = ckpt.momentum.iter().map(|r| (r.name.as_str(), r)).collect();
        for rec in &ckpt.params {
            let p = self
                .params
                .get(&rec.name)
                .ok_or_else(|| ckpt_err(format!("unknown parameter name `{}`", rec.name)))?;
            if p.tensor.shape() != rec.shape.as_slice() {
                return Err(ckpt_err(format!(
                    "parameter `{}` has shape {:?} in file, {:?} in model",
                    rec.name,
                    rec.shape,
                    p.tensor.shape()
                )));
            }
        }
        if !opts.allow_partial {
            let present: std::collections::HashSet<&str> = ckpt.params.iter().map(|r| r.name.as_str()).collect();
            if let Some(p) = self.params.iter().find(|p| !present.contains(p.name.as_str())) {
                return Err(ckpt_err(format!("parameter `{}` missing from checkpoint", p.name)));
            }
        }
        let mut loaded = Vec::new();
        for rec in &ckpt.params {
            let m = momentum.get(rec.name.as_str()).map(|m| m.values.clone());
            self.params.set_values(&rec.name, rec.values.clone(), m)?;
            loaded.push(rec.name.clone());
        }
        Ok(loaded)
    }
}

pub fn save_checkpoint(model: &BenthiqNet, seed: u64, epoch: usize, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_model(model, seed, epoch).save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<BenthiqNet> {
    Checkpoint::load(path)?.to_model()
}

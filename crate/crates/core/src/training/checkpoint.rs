//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic         8 bytes  "BVCKPT\0\1"
//! version       u32      1
//! stage         u8       0 supervised, 1 selfsup
//! step          u64
//! classes       u32
//! weights       7 x f64  w_pho w_ssim w_sc w_sm w_om w_D w_S
//! config_len    u32      then config_len bytes of UTF-8 JSON (TrainConfig)
//! blob_count    u32
//! blobs         name_len u32, name bytes, ndim u32, ndim x u64 dims,
//!               prod(dims) x f64 values
//! ```
//!
//! Blob names carry the network prefix (`depth.`, `seg.`, `pose.`); frozen
//! copies are stored under `frozen.` and optimizer moments under `adam.m.`
//! and `adam.v.`.

use std::io::Write;
use std::path::Path;

use super::{Adam, Stage, TrainConfig};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::networks::{ArchConfig, ParamStore};

pub const MAGIC: [u8; 8] = *b"BVCKPT\0\x01";
pub const VERSION: u32 = 1;

const FROZEN: &str = "frozen.";
const ADAM_M: &str = "adam.m.";
const ADAM_V: &str = "adam.v.";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub step: u64,
    pub classes: usize,
    pub weights: LossWeights,
    /// JSON of the [`TrainConfig`] that produced this checkpoint.
    pub config_json: String,
    /// Live networks under `depth.`, `seg.` and `pose.`.
    pub params: ParamStore,
    /// Frozen depth and seg copies (self-supervised stage only).
    pub frozen: ParamStore,
    pub adam_m: ParamStore,
    pub adam_v: ParamStore,
}

impl Checkpoint {
    pub fn new(stage: Stage, step: u64, config: &TrainConfig, params: ParamStore) -> Self {
        Checkpoint {
            stage,
            step,
            classes: config.arch.classes,
            weights: config.weights.clone(),
            config_json: config.to_json(),
            params,
            frozen: ParamStore::new(),
            adam_m: ParamStore::new(),
            adam_v: ParamStore::new(),
        }
    }

    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_json(&self.config_json)
            .map_err(|e| Error::config(format!("checkpoint config echo: {e}")))
    }

    pub fn arch(&self) -> Result<ArchConfig> {
        let arch = self.config()?.arch;
        if arch.classes != self.classes {
            return Err(Error::config(format!(
                "checkpoint class count {} disagrees with its config ({})",
                self.classes, arch.classes
            )));
        }
        Ok(arch)
    }

    /// Fails unless depth and seg parameters are present.
    pub fn require_networks(&self) -> Result<()> {
        for net in ["depth.", "seg."] {
            if !self.params.has_prefix(net) {
                return Err(Error::config(format!("checkpoint has no {net}* parameters")));
            }
        }
        Ok(())
    }

    /// Optimizer state to resume from, with the given hyperparameters.
    pub fn adam(&self, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Adam {
        let mut adam = Adam::new(lr, beta1, beta2, eps);
        adam.t = self.step;
        adam.m = self.adam_m.clone();
        adam.v = self.adam_v.clone();
        adam
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.stage.tag());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.classes as u32).to_le_bytes());
        for w in self.weights.to_array() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(self.config_json.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_json.as_bytes());
        let blobs: Vec<(String, &Tensor)> = self
            .params
            .iter()
            .map(|(k, v)| (k.to_string(), v))
            .chain(self.frozen.iter().map(|(k, v)| (format!("{FROZEN}{k}"), v)))
            .chain(self.adam_m.iter().map(|(k, v)| (format!("{ADAM_M}{k}"), v)))
            .chain(self.adam_v.iter().map(|(k, v)| (format!("{ADAM_V}{k}"), v)))
            .collect();
        out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
        for (name, t) in blobs {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(r.err(0, "not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(8, format!("unsupported checkpoint version {version}")));
        }
        let at = r.pos;
        let stage = Stage::from_tag(r.take(1)?[0]).ok_or_else(|| r.err(at, "unknown stage tag"))?;
        let step = r.u64()?;
        let classes = r.u32()? as usize;
        let mut w = [0.0; 7];
        for v in &mut w {
            *v = r.f64()?;
        }
        let weights = LossWeights::from_array(w);
        let len = r.u32()? as usize;
        let at = r.pos;
        let config_json = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.err(at, "config echo is not UTF-8"))?
            .to_string();
        let count = r.u32()?;
        let mut ck = Checkpoint {
            stage,
            step,
            classes,
            weights,
            config_json,
            params: ParamStore::new(),
            frozen: ParamStore::new(),
            adam_m: ParamStore::new(),
            adam_v: ParamStore::new(),
        };
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.err(at, "blob name is not UTF-8"))?
                .to_string();
            let ndim = r.u32()? as usize;
            if ndim > 8 {
                return Err(r.err(at, format!("blob {name}: {ndim} dimensions")));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let numel = match numel {
                Some(n) if n.checked_mul(8).is_some_and(|b| b <= r.remaining()) => n,
                _ => return Err(r.err(at, format!("blob {name}: shape {shape:?} exceeds file"))),
            };
            let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let t = Tensor::new(&shape, data)?;
            let (store, key) = if let Some(k) = name.strip_prefix(FROZEN) {
                (&mut ck.frozen, k)
            } else if let Some(k) = name.strip_prefix(ADAM_M) {
                (&mut ck.adam_m, k)
            } else if let Some(k) = name.strip_prefix(ADAM_V) {
                (&mut ck.adam_v, k)
            } else {
                (&mut ck.params, name.as_str())
            };
            if store.contains(key) {
                return Err(r.err(at, format!("duplicate blob {name}")));
            }
            store.insert(key, t);
        }
        if r.remaining() != 0 {
            return Err(r.err(r.pos, "trailing bytes"));
        }
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Writes to a temporary file beside `path`, then renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()
        };
        if let Err(e) = write() {
            let _ = std::fs::remove_file(&tmp);
            return Err(Error::io(&tmp, e));
        }
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, detail: impl Into<String>) -> Error {
        Error::parse(self.path, offset, detail)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.err(self.pos, format!("truncated: need {n} bytes, {} left", self.remaining())));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

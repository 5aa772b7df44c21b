//! Self-describing little-endian tensor container used for model
//! checkpoints and feature archives.
//!
//! Layout: 8 magic bytes, `u32` record count, then per record `u32` name
//! length, UTF-8 name, `u32` dim count, `u64` dims, and `f64` values.

use std::path::Path;

use super::{ModelSpec, Network, Tensor};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"ASMAPNN1";
pub const FEATURE_MAGIC: &[u8; 8] = b"ASMAPFT1";

const SPEC_RECORD: &str = "meta.spec";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    pub records: Vec<(String, Tensor)>,
}

impl TensorArchive {
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.records.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self, magic: &[u8; 8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(magic);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, t) in &self.records {
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

    pub fn from_bytes(bytes: &[u8], magic: &[u8; 8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        let found = r.take(8)?;
        if found != magic {
            return Err(r.error(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            )));
        }
        let count = r.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.error("record name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| r.error("record too large".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let tensor = Tensor::new(shape, data).map_err(|e| r.error(format!("record {name}: {e}")))?;
            records.push((name, tensor));
        }
        if r.pos != bytes.len() {
            return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path, magic: &[u8; 8]) -> Result<()> {
        std::fs::write(path, self.to_bytes(magic)).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, magic: &[u8; 8]) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, magic, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn error(&self, message: String) -> Error {
        Error::Parse { path: self.path.to_path_buf(), location: format!("byte {}", self.pos), message }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!("unexpected end of file, needed {n} more bytes")));
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
}

fn encode_spec(spec: &ModelSpec) -> Vec<f64> {
    let v: Vec<usize> = match spec {
        ModelSpec::Cnn { in_bands, height, width, n_classes } => vec![0, *in_bands, *height, *width, *n_classes],
        ModelSpec::Mlp { input_dim, n_classes } => vec![1, *input_dim, *n_classes],
        ModelSpec::Linear { input_dim, hidden, n_classes } => {
            let mut v = vec![2, *input_dim, *n_classes];
            v.extend(hidden);
            v
        }
        ModelSpec::CnnCustom { in_bands, height, width, conv_filters, hidden, n_classes } => {
            vec![3, *in_bands, *height, *width, conv_filters[0], conv_filters[1], hidden[0], hidden[1], *n_classes]
        }
    };
    v.into_iter().map(|x| x as f64).collect()
}

fn decode_spec(v: &[f64]) -> Option<ModelSpec> {
    let u: Vec<usize> = v.iter().map(|&x| x as usize).collect();
    match u.as_slice() {
        [0, b, h, w, c] => Some(ModelSpec::Cnn { in_bands: *b, height: *h, width: *w, n_classes: *c }),
        [1, d, c] => Some(ModelSpec::Mlp { input_dim: *d, n_classes: *c }),
        [2, d, c, hidden @ ..] => Some(ModelSpec::Linear { input_dim: *d, hidden: hidden.to_vec(), n_classes: *c }),
        [3, b, h, w, f1, f2, h1, h2, c] => Some(ModelSpec::CnnCustom {
            in_bands: *b,
            height: *h,
            width: *w,
            conv_filters: [*f1, *f2],
            hidden: [*h1, *h2],
            n_classes: *c,
        }),
        _ => None,
    }
}

impl Network {
    /// Architecture record followed by every parameter tensor.
    pub fn to_archive(&self) -> TensorArchive {
        let mut archive = TensorArchive::default();
        archive.push(SPEC_RECORD, Tensor::from_vec(encode_spec(&self.spec)));
        for (name, (_, t)) in self.parameter_names().into_iter().zip(self.parameters()) {
            archive.push(name, t.clone());
        }
        archive
    }

    /// Rebuilds a network from [`Network::to_archive`] output. Records other
    /// than the architecture and parameters are ignored.
    pub fn from_archive(archive: &TensorArchive) -> Result<Self> {
        let spec = archive
            .get(SPEC_RECORD)
            .and_then(|t| decode_spec(t.data()))
            .ok_or_else(|| Error::invalid("checkpoint has no valid architecture record"))?;
        let mut net = Network::build(spec, 0)?;
        let names = net.parameter_names();
        for (name, param) in names.iter().zip(net.parameters_mut()) {
            let stored = archive.get(name).ok_or_else(|| Error::invalid(format!("checkpoint is missing {name}")))?;
            if stored.shape() != param.shape() {
                return Err(Error::shape(format!("{name} {:?}", param.shape()), format!("{:?}", stored.shape())));
            }
            param.data_mut().copy_from_slice(stored.data());
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path, extra: &[(String, Tensor)]) -> Result<()> {
        let mut archive = self.to_archive();
        archive.records.extend(extra.iter().cloned());
        archive.write(path, MODEL_MAGIC)
    }

    /// Loads a checkpoint, returning the network and the full archive so
    /// callers can read their own metadata records.
    pub fn load(path: &Path) -> Result<(Self, TensorArchive)> {
        let archive = TensorArchive::read(path, MODEL_MAGIC)?;
        Ok((Self::from_archive(&archive)?, archive))
    }
}

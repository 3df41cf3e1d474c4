//! Binary parameter files.
//!
//! Little-endian layout:
//!
//! ```text
//! "PPTW" | version u32 = 1 | layer count u32
//! per layer: name len u32 | UTF-8 name | rows u32 | cols u32 | rows*cols f32 (row-major) | rows f32
//! trailer:   log-std len u32 | f32 entries
//! ```
//!
//! Values are stored as `f32`; anything already representable in `f32`
//! survives a round trip bit-exactly.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{Layer, ParamStore};
use super::NnError;

pub const MAGIC: &[u8; 4] = b"PPTW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("payload truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("dimension records account for {expected} bytes but payload has {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("layer name is not valid UTF-8")]
    BadName,
    #[error("invalid parameters: {0}")]
    Invalid(#[from] NnError),
}

/// Contents of a parameter file: the layers plus an optional log-std vector (empty if absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub params: ParamStore,
    pub log_std: Vec<f64>,
}

pub fn serialize_params(params: &ParamStore, log_std: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_params() * 4);
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_u32(&mut out, params.len() as u32);
    for layer in params.layers() {
        push_u32(&mut out, layer.name.len() as u32);
        out.extend_from_slice(layer.name.as_bytes());
        push_u32(&mut out, layer.rows as u32);
        push_u32(&mut out, layer.cols as u32);
        for v in layer.weight.iter().chain(&layer.bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    push_u32(&mut out, log_std.len() as u32);
    for v in log_std {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn deserialize_params(bytes: &[u8]) -> Result<ParamFile, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic.to_vec()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::VersionMismatch { found: version });
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| FormatError::BadName)?.to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let weight = r.f32s(rows.checked_mul(cols).ok_or(FormatError::LengthMismatch {
            expected: usize::MAX,
            actual: bytes.len(),
        })?)?;
        let bias = r.f32s(rows)?;
        layers.push(Layer::new(name, rows, cols, weight, bias)?);
    }
    let n = r.u32()? as usize;
    let log_std = r.f32s(n)?;
    if r.pos != bytes.len() {
        return Err(FormatError::LengthMismatch { expected: r.pos, actual: bytes.len() });
    }
    if log_std.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::Invalid(NnError::NonFinite("log_std".into())));
    }
    Ok(ParamFile { params: ParamStore::new(layers)?, log_std })
}

#[derive(Debug, thiserror::Error)]
pub enum ParamFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
}

pub fn write_param_file(path: &Path, params: &ParamStore, log_std: &[f64]) -> Result<(), ParamFileError> {
    std::fs::write(path, serialize_params(params, log_std))
        .map_err(|source| ParamFileError::Io { path: path.display().to_string(), source })
}

pub fn read_param_file(path: &Path) -> Result<ParamFile, ParamFileError> {
    let bytes = std::fs::read(path).map_err(|source| ParamFileError::Io { path: path.display().to_string(), source })?;
    deserialize_params(&bytes).map_err(|source| ParamFileError::Format { path: path.display().to_string(), source })
}

/// SHA-256 over the serialized layers (no log-std trailer), hex encoded.
pub fn params_hash(params: &ParamStore) -> String {
    hex::encode(Sha256::digest(serialize_params(params, &[])))
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated { offset: self.pos, needed: n, available });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let raw = self.take(n.checked_mul(4).ok_or(FormatError::Truncated {
            offset: self.pos,
            needed: usize::MAX,
            available: self.bytes.len() - self.pos,
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

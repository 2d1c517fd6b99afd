//! Binary tensor container shared by feature dumps, weight files and
//! attention stacks.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "BKTC"
//! version      u32      1
//! endian       u8       1 = little-endian payloads
//! reserved     3 bytes  zero
//! n_tensors    u32
//! meta_len     u32
//! meta         meta_len bytes of UTF-8 JSON
//! per tensor:  name_len u32, name bytes, dtype u8 (0 = f32), ndim u32, dims u64 x ndim
//! payloads     raw f32 values for each tensor in header order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde_json::Value;
use thiserror::Error;

use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"BKTC";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a tensor container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("big-endian payloads are not supported")]
    Endian,
    #[error("unsupported dtype code {0}")]
    DType(u8),
    #[error("invalid metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("invalid tensor name: {0}")]
    Name(#[from] std::string::FromUtf8Error),
    #[error("tensor {0:?} has an invalid shape")]
    Shape(String),
    #[error("missing tensor {0:?}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub meta: Value,
    pub tensors: IndexMap<String, Tensor>,
}

impl Container {
    pub fn new(meta: Value) -> Self {
        Self { meta, tensors: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, ContainerError> {
        self.tensors.get(name).ok_or_else(|| ContainerError::Missing(name.to_string()))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ContainerError> {
        let meta = serde_json::to_vec(&self.meta)?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[1, 0, 0, 0])?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[DTYPE_F32])?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
        }
        for t in self.tensors.values() {
            let mut buf = Vec::with_capacity(t.numel() * 4);
            for &v in t.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ContainerError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(ContainerError::Version(version));
        }
        let mut flags = [0u8; 4];
        r.read_exact(&mut flags)?;
        if flags[0] != 1 {
            return Err(ContainerError::Endian);
        }
        let n = read_u32(r)? as usize;
        let meta_len = read_u32(r)? as usize;
        let meta: Value = serde_json::from_slice(&read_vec(r, meta_len)?)?;
        let mut headers = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(r)? as usize;
            let name = String::from_utf8(read_vec(r, len)?)?;
            let mut dtype = [0u8];
            r.read_exact(&mut dtype)?;
            if dtype[0] != DTYPE_F32 {
                return Err(ContainerError::DType(dtype[0]));
            }
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(usize::try_from(u64::from_le_bytes(b)).map_err(|_| ContainerError::Shape(name.clone()))?);
            }
            headers.push((name, shape));
        }
        let mut tensors = IndexMap::with_capacity(n);
        for (name, shape) in headers {
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| ContainerError::Shape(name.clone()))?;
            let bytes = read_vec(r, count.checked_mul(4).ok_or_else(|| ContainerError::Shape(name.clone()))?)?;
            let data =
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
            let t = Tensor::new(shape, data).map_err(|_| ContainerError::Shape(name.clone()))?;
            tensors.insert(name, t);
        }
        Ok(Self { meta, tensors })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, ContainerError> {
        Self::read_from(&mut bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), ContainerError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ContainerError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_vec(r: &mut impl Read, len: usize) -> std::io::Result<Vec<u8>> {
    // Read incrementally so a corrupt length cannot trigger a huge allocation.
    let mut out = Vec::new();
    r.take(len as u64).read_to_end(&mut out)?;
    if out.len() != len {
        return Err(std::io::ErrorKind::UnexpectedEof.into());
    }
    Ok(out)
}

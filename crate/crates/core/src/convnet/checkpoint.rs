//! `CCNN` checkpoint files.
//!
//! Layout (little-endian): magic `CCNN`, version u32, the architecture
//! (input c/h/w, block count, per block channels/kernel h/kernel w/pool
//! h/pool w, output count, all u32), a metadata section (u32 count of
//! length-prefixed key/value strings), then a u32 tensor count and the named
//! tensors: u32 name length, UTF-8 name, dtype u8 (0 = f32, 1 = f64), rank
//! u8, u32 dims, payload.

use std::io::{self, Read, Write};
use std::path::Path;

use super::arch::{ArchSpec, BlockSpec};
use super::network::{BN_EPSILON, BN_MOMENTUM};
use super::params::ModelParams;
use super::scalar::Scalar;
use crate::binio::*;
use crate::provenance::digest_hex;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CCNN";
const VERSION: u32 = 1;
const MAX_NAME: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    /// Ordered key/value pairs; tag names are stored as `tag.<j>`.
    pub metadata: Vec<(String, String)>,
    /// Digest of the file contents.
    pub id: String,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Tag names in output order, if recorded.
    pub fn tags(&self) -> Option<Vec<String>> {
        (0..self.params.arch.n_outputs)
            .map(|j| self.meta(&format!("tag.{j}")).map(str::to_string))
            .collect()
    }
}

/// Metadata every checkpoint carries: initialisation and batchnorm settings,
/// precision, and the tag names of the outputs.
pub fn standard_metadata<T: Scalar>(tags: &[String], extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut m = vec![
        ("init".to_string(), "he-uniform conv and dense weights; zero biases; bn gain 1, bias 0".to_string()),
        ("bn.epsilon".into(), BN_EPSILON.to_string()),
        ("bn.momentum".into(), BN_MOMENTUM.to_string()),
        ("precision".into(), T::NAME.to_string()),
    ];
    m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    m.extend(tags.iter().enumerate().map(|(j, t)| (format!("tag.{j}"), t.clone())));
    m
}

pub fn write_checkpoint<T: Scalar>(w: &mut impl Write, params: &ModelParams<T>, metadata: &[(String, String)]) -> io::Result<()> {
    let arch = &params.arch;
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    let (c, h, wd) = arch.input;
    for v in [c, h, wd, arch.blocks.len()] {
        write_u32(w, v as u32)?;
    }
    for b in &arch.blocks {
        for v in [b.channels, b.kernel.0, b.kernel.1, b.pool.0, b.pool.1] {
            write_u32(w, v as u32)?;
        }
    }
    write_u32(w, arch.n_outputs as u32)?;
    write_u32(w, metadata.len() as u32)?;
    for (k, v) in metadata {
        write_str(w, k)?;
        write_str(w, v)?;
    }
    let tensors = params.named_tensors();
    write_u32(w, tensors.len() as u32)?;
    let mut payload = Vec::new();
    for (name, dims, data) in tensors {
        write_str(w, &name)?;
        write_u8(w, T::DTYPE)?;
        write_u8(w, dims.len() as u8)?;
        for d in dims {
            write_u32(w, d as u32)?;
        }
        payload.clear();
        for &v in data {
            v.write_le(&mut payload);
        }
        w.write_all(&payload)?;
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a checkpoint, converting payloads to `T` when the stored dtype
/// differs.
pub fn read_checkpoint<T: Scalar>(r: &mut impl Read) -> io::Result<(ModelParams<T>, Vec<(String, String)>)> {
    read_magic(r, MAGIC)?;
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(invalid(format!("unsupported checkpoint version {version}")));
    }
    let mut u = || read_u32(r).map(|v| v as usize);
    let input = (u()?, u()?, u()?);
    let n_blocks = u()?;
    if n_blocks > 64 {
        return Err(invalid(format!("implausible block count {n_blocks}")));
    }
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        blocks.push(BlockSpec {
            channels: u()?,
            kernel: (u()?, u()?),
            pool: (u()?, u()?),
        });
    }
    let n_outputs = u()?;
    let arch = ArchSpec {
        input,
        blocks,
        n_outputs,
    };
    let mut params = ModelParams::<T>::zeros(&arch).map_err(|e| invalid(e.to_string()))?;
    let n_meta = read_u32(r)? as usize;
    let mut metadata = Vec::with_capacity(n_meta.min(1024));
    for _ in 0..n_meta {
        metadata.push((read_str(r, MAX_NAME)?, read_str(r, 1 << 20)?));
    }
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, d, _)| (n, d))
        .collect();
    let n_tensors = read_u32(r)? as usize;
    if n_tensors != expected.len() {
        return Err(invalid(format!(
            "{n_tensors} tensors, architecture needs {}",
            expected.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..n_tensors {
        let name = read_str(r, MAX_NAME)?;
        let dtype = read_u8(r)?;
        let rank = read_u8(r)? as usize;
        let dims = (0..rank)
            .map(|_| read_u32(r).map(|d| d as usize))
            .collect::<io::Result<Vec<_>>>()?;
        let want = expected
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| invalid(format!("unexpected tensor `{name}`")))?;
        if want.1 != dims {
            return Err(invalid(format!("tensor `{name}` has dims {dims:?}, expected {:?}", want.1)));
        }
        if !seen.insert(name.clone()) {
            return Err(invalid(format!("tensor `{name}` repeated")));
        }
        let len: usize = dims.iter().product();
        let slot = params.tensor_mut(&name).expect("name checked above");
        for v in slot.iter_mut().take(len) {
            *v = match dtype {
                0 => T::of(read_f32(r)? as f64),
                1 => T::of(read_f64(r)?),
                d => return Err(invalid(format!("unknown dtype {d}"))),
            };
        }
    }
    params.validate().map_err(|e| invalid(e.to_string()))?;
    Ok((params, metadata))
}

pub fn save_checkpoint<T: Scalar>(path: &Path, params: &ModelParams<T>, metadata: &[(String, String)]) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params, metadata).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (params, metadata) = read_checkpoint(&mut &bytes[..]).map_err(|e| match e.kind() {
        io::ErrorKind::InvalidData | io::ErrorKind::UnexpectedEof => Error::format(path, e.to_string()),
        _ => Error::io(path, e),
    })?;
    Ok(Checkpoint {
        params,
        metadata,
        id: digest_hex(&bytes),
    })
}

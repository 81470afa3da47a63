//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "AOPCKPT1"
//! config_hash  u64      first 8 bytes of SHA-256(config_json), little-endian
//! config_len   u32
//! config_json  config_len bytes, UTF-8
//! n_tensors    u32
//! n_tensors × {
//!     name_len u32, name (UTF-8),
//!     ndim u32, dims u64 × ndim,
//!     values f64 × product(dims)
//! }
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AOPCKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_json: String,
    pub config_hash: u64,
    pub tensors: Vec<(String, Tensor)>,
}

pub fn config_hash(config_json: &str) -> u64 {
    let digest = Sha256::digest(config_json.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

pub fn write_checkpoint<'a, W: Write>(
    mut w: W,
    config_json: &str,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>,
) -> Result<()> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&config_hash(config_json).to_le_bytes())?;
    write_bytes(&mut w, config_json.as_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        write_bytes(&mut w, name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Data("not a checkpoint (bad magic)".into()));
    }
    let stored_hash = read_u64(&mut r)?;
    let config_json = String::from_utf8(read_bytes(&mut r)?)
        .map_err(|_| Error::Data("checkpoint config is not UTF-8".into()))?;
    if config_hash(&config_json) != stored_hash {
        return Err(Error::Data("checkpoint config hash mismatch".into()));
    }
    let n = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let name = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|_| Error::Data("tensor name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let mut raw = vec![0u8; numel * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    Ok(Checkpoint {
        config_json,
        config_hash: stored_hash,
        tensors,
    })
}

fn write_bytes<W: Write>(w: &mut W, b: &[u8]) -> Result<()> {
    w.write_all(&(b.len() as u32).to_le_bytes())?;
    w.write_all(b)?;
    Ok(())
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let n = read_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

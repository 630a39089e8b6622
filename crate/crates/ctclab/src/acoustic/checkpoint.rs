//! Versioned binary checkpoints.
//!
//! Layout (all little-endian): magic `CKPT`, u32 format version, the model
//! config (u32 input_dim, u32 context, u32 hidden layer count, u32 per
//! hidden width, u32 vocab_size, u64 seed), then each layer's weights
//! (row-major) and bias as f64.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ModelConfig, ModelParams};

const MAGIC: &[u8; 4] = b"CKPT";
const VERSION: u32 = 1;

/// Byte image of a checkpoint; [`save`] writes exactly these bytes.
pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let cfg = &params.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.input_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.context as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.hidden_dims.len() as u32).to_le_bytes());
    for &h in &cfg.hidden_dims {
        buf.extend_from_slice(&(h as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(cfg.vocab_size as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.seed.to_le_bytes());
    for layer in &params.layers {
        for v in &layer.w.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.b {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    let bad = |reason: &str| Error::BadCheckpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(bad("bad magic, expected CKPT"));
    }
    let version = read_u32(&mut reader, path)?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let input_dim = read_u32(&mut reader, path)? as usize;
    let context = read_u32(&mut reader, path)? as usize;
    let n_hidden = read_u32(&mut reader, path)? as usize;
    if n_hidden > 64 {
        return Err(bad(&format!("implausible hidden layer count {n_hidden}")));
    }
    let mut hidden_dims = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_dims.push(read_u32(&mut reader, path)? as usize);
    }
    let vocab_size = read_u32(&mut reader, path)? as usize;
    let mut seed_bytes = [0u8; 8];
    reader
        .read_exact(&mut seed_bytes)
        .map_err(|e| Error::io(path, e))?;
    let config = ModelConfig {
        input_dim,
        context,
        hidden_dims,
        vocab_size,
        seed: u64::from_le_bytes(seed_bytes),
    };
    let mut params = ModelParams::zeros(&config)
        .map_err(|_| bad("config describes a degenerate model"))?;
    for layer in &mut params.layers {
        read_f64_slice(&mut reader, &mut layer.w.data, path)?;
        read_f64_slice(&mut reader, &mut layer.b, path)?;
    }
    let mut trailing = [0u8; 1];
    match reader.read(&mut trailing) {
        Ok(0) => Ok(params),
        Ok(_) => Err(bad("trailing bytes after parameter blocks")),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32> {
    let mut bytes = [0u8; 4];
    reader.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(bytes))
}

fn read_f64_slice(reader: &mut impl Read, out: &mut [f64], path: &Path) -> Result<()> {
    let mut bytes = vec![0u8; out.len() * 8];
    reader.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        out[i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(())
}

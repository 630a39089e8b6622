//! Feature matrix files.
//!
//! Two interchangeable on-disk formats, selected by extension:
//! - binary (any extension except `.txt`): 12-byte header — magic `FTR1`,
//!   u32 frame count, u32 feature dim, both little-endian — followed by
//!   `T x F` float32 values, row-major, little-endian;
//! - `.txt`: T lines of F space-separated decimals.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FTR1";

/// A `T x F` matrix of feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::ShapeMismatch {
                expected: "T >= 1 and F >= 1".into(),
                actual: format!("T={frames}, F={dim}"),
            });
        }
        if data.len() != frames * dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{frames}x{dim} = {} values", frames * dim),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(FeatureMatrix { frames, dim, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn read(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "txt") {
            Self::read_text(path)
        } else {
            Self::read_binary(path)
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if path.extension().is_some_and(|e| e == "txt") {
            self.write_text(path)
        } else {
            self.write_binary(path)
        }
    }

    fn read_binary(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header = [0u8; 12];
        file.read_exact(&mut header)
            .map_err(|e| Error::io(path, e))?;
        if &header[0..4] != MAGIC {
            return Err(Error::BadFeatureFile {
                path: path.to_path_buf(),
                reason: "bad magic, expected FTR1".into(),
            });
        }
        let frames = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        if frames == 0 || dim == 0 {
            return Err(Error::BadFeatureFile {
                path: path.to_path_buf(),
                reason: format!("degenerate shape {frames}x{dim}"),
            });
        }
        let mut raw = Vec::new();
        file.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
        if raw.len() != frames * dim * 4 {
            return Err(Error::BadFeatureFile {
                path: path.to_path_buf(),
                reason: format!(
                    "expected {} payload bytes for {frames}x{dim}, found {}",
                    frames * dim * 4,
                    raw.len()
                ),
            });
        }
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FeatureMatrix::new(frames, dim, data)
    }

    fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + self.data.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.frames as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    fn read_text(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut data = Vec::new();
        let mut dim = 0usize;
        let mut frames = 0usize;
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f32>, _> =
                line.split_whitespace().map(str::parse::<f32>).collect();
            let row = row.map_err(|e| Error::BadFeatureFile {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", n + 1),
            })?;
            if frames == 0 {
                dim = row.len();
            } else if row.len() != dim {
                return Err(Error::BadFeatureFile {
                    path: path.to_path_buf(),
                    reason: format!("line {}: expected {dim} values, found {}", n + 1, row.len()),
                });
            }
            frames += 1;
            data.extend(row);
        }
        if frames == 0 {
            return Err(Error::BadFeatureFile {
                path: path.to_path_buf(),
                reason: "no feature rows".into(),
            });
        }
        FeatureMatrix::new(frames, dim, data)
    }

    fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

//! Probability grids computed outside this crate, one per image (and
//! optionally per crop of the standard crop grid).
//!
//! JSON form:
//!
//! ```text
//! { "n": N, "label_space": "<reference>",
//!   "records": [ { "image_id": "...", "crop": null | k, "probabilities": [N*N values] } ] }
//! ```
//!
//! Binary form (all integers and floats little-endian):
//!
//! ```text
//! b"HKGRID1\0"
//! u32 N, u32 record count, u32 reference length, reference bytes (UTF-8)
//! per record: u32 id length, id bytes (UTF-8), i32 crop (-1 = none), N*N f64 probabilities
//! ```
//!
//! Grids are row-major with `theta` bins along rows. A record without a crop
//! index describes the largest centered square; crop `k` is entry `k` of
//! [`make_crop_grid`](crate::aggregation::make_crop_grid).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 8] = b"HKGRID1\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub image_id: String,
    pub crop: Option<usize>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalGrids {
    pub n: usize,
    pub label_space: String,
    pub records: Vec<GridRecord>,
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line: 0, message: message.into() }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl ExternalGrids {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.records {
            if r.probabilities.len() != self.n * self.n {
                return Err(Error::invalid(format!(
                    "grid for {} has {} values, expected {}",
                    r.image_id,
                    r.probabilities.len(),
                    self.n * self.n
                )));
            }
            if !seen.insert((r.image_id.as_str(), r.crop)) {
                return Err(Error::invalid(format!("duplicate grid for {} crop {:?}", r.image_id, r.crop)));
            }
        }
        Ok(())
    }

    /// Reads either form, chosen by the magic bytes.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let grids = if bytes.starts_with(GRID_MAGIC) {
            Self::from_binary(&bytes).map_err(|e| parse_error(path, e.to_string()))?
        } else {
            serde_json::from_slice(&bytes)?
        };
        grids.validate()?;
        Ok(grids)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.label_space.len() as u32).to_le_bytes());
        out.extend_from_slice(self.label_space.as_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.image_id.len() as u32).to_le_bytes());
            out.extend_from_slice(r.image_id.as_bytes());
            out.extend_from_slice(&r.crop.map_or(-1, |c| c as i32).to_le_bytes());
            for p in &r.probabilities {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_binary())?;
        Ok(())
    }

    pub fn from_binary(bytes: &[u8]) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(bad("missing grid file magic"));
        }
        let n = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let read_string = |r: &mut &[u8]| -> std::io::Result<String> {
            let len = read_u32(r)? as usize;
            if len > r.len() {
                return Err(bad("string runs past end of file"));
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            String::from_utf8(buf).map_err(|_| bad("string is not UTF-8"))
        };
        let label_space = read_string(&mut r)?;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let image_id = read_string(&mut r)?;
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            let crop = i32::from_le_bytes(b);
            let crop = if crop < 0 { None } else { Some(crop as usize) };
            let mut probabilities = Vec::with_capacity(n * n);
            let mut f = [0u8; 8];
            for _ in 0..n * n {
                r.read_exact(&mut f)?;
                probabilities.push(f64::from_le_bytes(f));
            }
            records.push(GridRecord { image_id, crop, probabilities });
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes after last record"));
        }
        Ok(Self { n, label_space, records })
    }

    /// Records keyed by `(image id, crop)`.
    pub fn index(&self) -> BTreeMap<(String, Option<usize>), &GridRecord> {
        self.records.iter().map(|r| ((r.image_id.clone(), r.crop), r)).collect()
    }
}

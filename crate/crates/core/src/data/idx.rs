//! IDX container format: big-endian magic `0x0000_08DD` (`08` = unsigned
//! byte, `DD` = dimension count), one big-endian `u32` per dimension, then
//! the raw payload.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const UBYTE: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn magic(&self) -> u32 {
        u32::from(UBYTE) << 8 | self.dims.len() as u32
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Data("IDX file shorter than its magic number".into()));
        }
        if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != UBYTE || bytes[3] == 0 {
            return Err(Error::Data(format!(
                "bad IDX magic {:02x}{:02x}{:02x}{:02x}",
                bytes[0], bytes[1], bytes[2], bytes[3]
            )));
        }
        let ndim = bytes[3] as usize;
        let header = 4 + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Data("IDX header truncated".into()));
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let expected: usize = dims.iter().product();
        let payload = &bytes[header..];
        if payload.len() != expected {
            return Err(Error::Data(format!(
                "IDX payload has {} bytes, dimensions {dims:?} need {expected}",
                payload.len()
            )));
        }
        Ok(IdxArray {
            dims,
            data: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    /// Number of records along the first dimension.
    pub fn count(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    /// Bytes per record.
    pub fn record_len(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    pub fn record(&self, i: usize) -> &[u8] {
        let len = self.record_len();
        &self.data[i * len..(i + 1) * len]
    }
}

pub fn read_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    let mut bytes = Vec::new();
    GzDecoder::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Data(format!("{}: gzip decode failed: {e}", path.display())))?;
    Ok(bytes)
}

pub fn read_idx_gz(path: &Path, expected_magic: u32) -> Result<IdxArray> {
    let arr = IdxArray::parse(&read_gz(path)?).map_err(|e| e.context(path.display().to_string()))?;
    if arr.magic() != expected_magic {
        return Err(Error::Data(format!(
            "{}: magic {:#010x}, expected {expected_magic:#010x}",
            path.display(),
            arr.magic()
        )));
    }
    Ok(arr)
}

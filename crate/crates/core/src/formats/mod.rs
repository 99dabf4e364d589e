//! Binary containers. All integers are little-endian and every file ends
//! with a CRC-32 (IEEE) of all preceding bytes.
//!
//! Raster (`SARC`) and label (`SARL`) files share a 20-byte header:
//!
//! | offset | size | field |
//! |---:|---:|---|
//! | 0 | 4 | magic |
//! | 4 | 2 | version (1) |
//! | 6 | 4 | height |
//! | 10 | 4 | width |
//! | 14 | 4 | channels |
//! | 18 | 1 | dtype: 0 = f32, 2 = u8 |
//! | 19 | 1 | reserved (0) |
//!
//! followed by the planes in channel order, each row-major, and the
//! checksum. The checkpoint container (`RRCW`) is described in [`rrcw`].

mod raster;
pub mod rrcw;

pub use raster::{
    decode_labels, decode_raster, encode_labels, encode_raster, read_labels, read_raster, write_labels, write_raster,
    HEADER_LEN, LABEL_MAGIC, RASTER_MAGIC,
};
pub use rrcw::{BlockRecord, Checkpoint, CHECKPOINT_MAGIC};

use std::path::Path;

use crate::error::{Error, FormatError, Result};

pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_U8: u8 = 2;

pub(crate) fn format_err(path: &str, kind: FormatError) -> Error {
    Error::Format {
        path: path.to_string(),
        kind,
    }
}

/// Little-endian cursor over a byte slice that reports truncation.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], path: &'a str) -> Self {
        Reader { buf, pos: 0, path }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            format_err(
                self.path,
                FormatError::Truncated {
                    expected: self.pos.saturating_add(n),
                    found: self.buf.len(),
                },
            )
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).unwrap_or(usize::MAX))?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).unwrap_or(usize::MAX))?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Split off and verify the trailing checksum.
pub(crate) fn verify_crc<'a>(bytes: &'a [u8], path: &str, min_len: usize) -> Result<&'a [u8]> {
    if bytes.len() < min_len + 4 {
        return Err(format_err(
            path,
            FormatError::Truncated {
                expected: min_len + 4,
                found: bytes.len(),
            },
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(format_err(path, FormatError::Checksum { stored, computed }));
    }
    Ok(body)
}

pub(crate) fn seal(mut body: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&body);
    body.extend_from_slice(&crc.to_le_bytes());
    body
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

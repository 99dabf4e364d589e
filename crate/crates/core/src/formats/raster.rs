use std::path::Path;

use super::{format_err, read_file, seal, verify_crc, write_file, Reader, DTYPE_F32, DTYPE_U8, VERSION};
use crate::data::{LabelRaster, RasterStack};
use crate::error::{FormatError, Result};

pub const RASTER_MAGIC: [u8; 4] = *b"SARC";
pub const LABEL_MAGIC: [u8; 4] = *b"SARL";
pub const HEADER_LEN: usize = 20;

struct Header {
    height: usize,
    width: usize,
    channels: usize,
}

fn header(magic: [u8; 4], h: usize, w: usize, c: usize, dtype: u8) -> Vec<u8> {
    let mut b = Vec::with_capacity(HEADER_LEN);
    b.extend_from_slice(&magic);
    b.extend_from_slice(&VERSION.to_le_bytes());
    for v in [h, w, c] {
        b.extend_from_slice(&(v as u32).to_le_bytes());
    }
    b.push(dtype);
    b.push(0);
    b
}

fn parse_header(r: &mut Reader<'_>, path: &str, magic: [u8; 4], dtype: u8) -> Result<Header> {
    let found: [u8; 4] = r.take(4)?.try_into().unwrap();
    if found != magic {
        return Err(format_err(path, FormatError::BadMagic { expected: magic, found }));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(format_err(path, FormatError::UnsupportedVersion(version)));
    }
    let (height, width, channels) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let d = r.u8()?;
    if d != dtype {
        return Err(format_err(path, FormatError::UnsupportedDtype(d)));
    }
    r.u8()?;
    if height == 0 || width == 0 || channels == 0 {
        return Err(format_err(
            path,
            FormatError::DimMismatch(format!("zero extent {height}x{width}x{channels}")),
        ));
    }
    Ok(Header { height, width, channels })
}

/// Header checks first (so a damaged magic reads as such), then length,
/// then checksum. Returns the payload.
fn open<'a>(bytes: &'a [u8], path: &str, magic: [u8; 4], dtype: u8, elem: usize) -> Result<(Header, &'a [u8])> {
    let mut r = Reader::new(bytes, path);
    let h = parse_header(&mut r, path, magic, dtype)?;
    let payload = h.height * h.width * h.channels * elem;
    let expected = HEADER_LEN + payload + 4;
    if bytes.len() < expected {
        return Err(format_err(path, FormatError::Truncated { expected, found: bytes.len() }));
    }
    if bytes.len() > expected {
        return Err(format_err(
            path,
            FormatError::DimMismatch(format!("header implies {expected} bytes, file has {}", bytes.len())),
        ));
    }
    let body = verify_crc(bytes, path, HEADER_LEN)?;
    Ok((h, &body[HEADER_LEN..]))
}

pub fn encode_raster(stack: &RasterStack) -> Vec<u8> {
    let mut b = header(RASTER_MAGIC, stack.height, stack.width, stack.channels(), DTYPE_F32);
    b.reserve(stack.data.len() * 4 + 4);
    for v in &stack.data {
        b.extend_from_slice(&v.to_le_bytes());
    }
    seal(b)
}

/// Timestep tags are not stored; decoded stacks are tagged `t0`, `t1`, ...
pub fn decode_raster(bytes: &[u8], path: &str) -> Result<RasterStack> {
    let (h, payload) = open(bytes, path, RASTER_MAGIC, DTYPE_F32, 4)?;
    if h.channels % 2 != 0 {
        return Err(format_err(
            path,
            FormatError::DimMismatch(format!("{} channels is not a whole number of VV/VH pairs", h.channels)),
        ));
    }
    let data = Reader::new(payload, path).f32s(payload.len() / 4)?;
    let tags = (0..h.channels / 2).map(|t| format!("t{t}")).collect();
    RasterStack::new(h.height, h.width, data, tags).map_err(|e| format_err(path, FormatError::Invalid(e.to_string())))
}

pub fn encode_labels(labels: &LabelRaster) -> Vec<u8> {
    let mut b = header(LABEL_MAGIC, labels.height, labels.width, 1, DTYPE_U8);
    b.extend_from_slice(&labels.codes);
    seal(b)
}

pub fn decode_labels(bytes: &[u8], path: &str) -> Result<LabelRaster> {
    let (h, payload) = open(bytes, path, LABEL_MAGIC, DTYPE_U8, 1)?;
    if h.channels != 1 {
        return Err(format_err(path, FormatError::DimMismatch(format!("{} label channels", h.channels))));
    }
    LabelRaster::new(h.height, h.width, payload.to_vec())
        .map_err(|e| format_err(path, FormatError::Invalid(e.to_string())))
}

pub fn write_raster(path: &Path, stack: &RasterStack) -> Result<()> {
    write_file(path, &encode_raster(stack))
}

pub fn read_raster(path: &Path) -> Result<RasterStack> {
    decode_raster(&read_file(path)?, &path.display().to_string())
}

pub fn write_labels(path: &Path, labels: &LabelRaster) -> Result<()> {
    write_file(path, &encode_labels(labels))
}

pub fn read_labels(path: &Path) -> Result<LabelRaster> {
    decode_labels(&read_file(path)?, &path.display().to_string())
}

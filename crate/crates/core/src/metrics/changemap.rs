use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::data::{LABEL_DEFORESTATION, LABEL_PAST};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChangeCategory {
    TruePositive,
    TrueNegative,
    FalsePositive,
    FalseNegative,
    PastDeforestation,
}

impl ChangeCategory {
    pub const ALL: [ChangeCategory; 5] = [
        ChangeCategory::PastDeforestation,
        ChangeCategory::TruePositive,
        ChangeCategory::TrueNegative,
        ChangeCategory::FalsePositive,
        ChangeCategory::FalseNegative,
    ];

    /// Legend colour.
    pub fn rgb(self) -> [u8; 3] {
        match self {
            ChangeCategory::PastDeforestation => [0x65, 0x65, 0x65],
            ChangeCategory::TruePositive => [0x9A, 0x00, 0x00],
            ChangeCategory::TrueNegative => [0x00, 0x00, 0x9B],
            ChangeCategory::FalsePositive => [0xFF, 0xC7, 0x02],
            ChangeCategory::FalseNegative => [0x2A, 0xEB, 0xE4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChangeCategory::PastDeforestation => "past deforestation",
            ChangeCategory::TruePositive => "true positive",
            ChangeCategory::TrueNegative => "true negative",
            ChangeCategory::FalsePositive => "false positive",
            ChangeCategory::FalseNegative => "false negative",
        }
    }

    pub fn classify(pred: u8, reference: u8) -> Self {
        if reference == LABEL_PAST {
            return ChangeCategory::PastDeforestation;
        }
        match (pred == LABEL_DEFORESTATION, reference == LABEL_DEFORESTATION) {
            (true, true) => ChangeCategory::TruePositive,
            (false, false) => ChangeCategory::TrueNegative,
            (true, false) => ChangeCategory::FalsePositive,
            (false, true) => ChangeCategory::FalseNegative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeMap {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<ChangeCategory>,
}

impl ChangeMap {
    pub fn new(height: usize, width: usize, pred: &[u8], reference: &[u8]) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("change_map", "empty map"));
        }
        if pred.len() != height * width {
            return Err(Error::dim("change_map", "pixel", height * width, pred.len()));
        }
        if reference.len() != pred.len() {
            return Err(Error::dim("change_map", "pixel", pred.len(), reference.len()));
        }
        let cells = pred.iter().zip(reference).map(|(&p, &r)| ChangeCategory::classify(p, r)).collect();
        Ok(ChangeMap { height, width, cells })
    }

    pub fn rgb(&self) -> Vec<u8> {
        self.cells.iter().flat_map(|c| c.rgb()).collect()
    }

    /// 8-bit RGB PNG.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::invalid("render", "empty map"));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut w = enc.write_header().map_err(to_io)?;
        w.write_image_data(&self.rgb()).map_err(to_io)?;
        w.finish().map_err(to_io)
    }
}

/// Decode an 8-bit RGB PNG into `(width, height, rgb)`.
pub fn read_png_rgb(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let to_io = |e: png::DecodingError| Error::io(path, std::io::Error::other(e));
    let mut reader = png::Decoder::new(std::io::BufReader::new(file)).read_info().map_err(to_io)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(to_io)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::invalid("read_png", format!("{:?}/{:?} is not 8-bit RGB", info.color_type, info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

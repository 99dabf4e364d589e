use std::str::FromStr;

use crate::error::{Error, Result};

pub const LABEL_NO_CHANGE: u8 = 0;
pub const LABEL_DEFORESTATION: u8 = 1;
pub const LABEL_PAST: u8 = 2;

/// `D` acquisitions of two polarisations each, stored as `2D` planes in
/// the order t0 VV, t0 VH, t1 VV, ...
#[derive(Clone, Debug, PartialEq)]
pub struct RasterStack {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    /// Free-text acquisition tag per timestep.
    pub tags: Vec<String>,
}

impl RasterStack {
    pub fn new(height: usize, width: usize, data: Vec<f32>, tags: Vec<String>) -> Result<Self> {
        let plane = height * width;
        if plane == 0 {
            return Err(Error::invalid("raster", "empty raster"));
        }
        let channels = data.len() / plane;
        if data.len() != channels * plane || channels == 0 || channels % 2 != 0 {
            return Err(Error::invalid(
                "raster",
                format!("{} values do not form an even number of {height}x{width} planes", data.len()),
            ));
        }
        if tags.len() != channels / 2 {
            return Err(Error::dim("raster", "timestep", channels / 2, tags.len()));
        }
        Ok(RasterStack { height, width, data, tags })
    }

    pub fn channels(&self) -> usize {
        self.data.len() / self.plane()
    }

    pub fn timesteps(&self) -> usize {
        self.channels() / 2
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.plane()..(c + 1) * self.plane()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRaster {
    pub height: usize,
    pub width: usize,
    pub codes: Vec<u8>,
}

impl LabelRaster {
    pub fn new(height: usize, width: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != height * width {
            return Err(Error::dim("labels", "pixel", height * width, codes.len()));
        }
        if let Some(bad) = codes.iter().find(|&&c| c > LABEL_PAST) {
            return Err(Error::invalid("labels", format!("code {bad} outside 0..=2")));
        }
        Ok(LabelRaster { height, width, codes })
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.codes[r * self.width + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TemporalMode {
    /// First and last acquisitions only.
    Bitemporal,
    /// Every acquisition.
    Multitemporal,
}

impl TemporalMode {
    pub const ALL: [TemporalMode; 2] = [TemporalMode::Bitemporal, TemporalMode::Multitemporal];

    pub fn as_str(self) -> &'static str {
        match self {
            TemporalMode::Bitemporal => "bitemporal",
            TemporalMode::Multitemporal => "multitemporal",
        }
    }
}

impl FromStr for TemporalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bitemporal" => Ok(TemporalMode::Bitemporal),
            "multitemporal" => Ok(TemporalMode::Multitemporal),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for TemporalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Keep the endpoints (bitemporal) or every timestep (multitemporal).
pub fn select_epochs(stack: &RasterStack, mode: TemporalMode) -> Result<RasterStack> {
    let d = stack.timesteps();
    if d < 2 {
        return Err(Error::invalid("select_epochs", format!("need at least 2 timesteps, found {d}")));
    }
    let keep: Vec<usize> = match mode {
        TemporalMode::Bitemporal => vec![0, d - 1],
        TemporalMode::Multitemporal => (0..d).collect(),
    };
    let mut data = Vec::with_capacity(keep.len() * 2 * stack.plane());
    for &t in &keep {
        data.extend_from_slice(stack.channel(2 * t));
        data.extend_from_slice(stack.channel(2 * t + 1));
    }
    let tags = keep.iter().map(|&t| stack.tags[t].clone()).collect();
    RasterStack::new(stack.height, stack.width, data, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack(d: usize) -> RasterStack {
        let data = (0..2 * d).flat_map(|c| vec![c as f32; 4]).collect();
        RasterStack::new(2, 2, data, (0..d).map(|t| format!("t{t}")).collect()).unwrap()
    }

    #[test]
    fn seven_timesteps_give_fourteen_then_four_channels() {
        let s = stack(7);
        assert_eq!(s.channels(), 14);
        let b = select_epochs(&s, TemporalMode::Bitemporal).unwrap();
        assert_eq!(b.channels(), 4);
        let firsts: Vec<f32> = (0..4).map(|c| b.channel(c)[0]).collect();
        assert_eq!(firsts, vec![0.0, 1.0, 12.0, 13.0]);
        assert_eq!(b.tags, vec!["t0", "t6"]);
    }

    #[test]
    fn two_timesteps_bitemporal_is_identity() {
        let s = stack(2);
        assert_eq!(select_epochs(&s, TemporalMode::Bitemporal).unwrap(), s);
    }

    #[test]
    fn single_timestep_is_rejected() {
        assert!(select_epochs(&stack(1), TemporalMode::Multitemporal).is_err());
    }
}

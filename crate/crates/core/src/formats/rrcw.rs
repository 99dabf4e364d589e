//! Checkpoint container `RRCW`, version 1:
//!
//! | field | encoding |
//! |---|---|
//! | magic | `RRCW` |
//! | version | u16 |
//! | architecture code | u8 (0 unet, 1 resunet, 2 r2unet, 3..5 rrcnn1..3) |
//! | reserved | u8 |
//! | input channels | u32 |
//! | config text | u32 length + UTF-8 `key = value` lines |
//! | block count | u32 |
//! | per block | id u32, name (u16 length + UTF-8), shape 4 x u32, bias length u32, weights f32[], biases f32[] |
//! | statistics flag | u8 (0 absent, 1 present) |
//! | statistics | channels u32, mean f64[], std f64[], floored u8[] |
//! | checksum | CRC-32 of everything above |

use std::path::Path;

use super::{format_err, read_file, seal, verify_crc, write_file, Reader, VERSION};
use crate::arch::{build, ArchConfig, ArchitectureId, Network};
use crate::data::ChannelStats;
use crate::error::{Error, FormatError, Result};
use crate::kv::KvMap;
use crate::nn::{Layer, ParamBlock};
use crate::tensor::{Shape, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RRCW";

#[derive(Clone, Debug, PartialEq)]
pub struct BlockRecord {
    pub id: u32,
    pub name: String,
    pub shape: Shape,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchitectureId,
    pub in_channels: usize,
    pub config: ArchConfig,
    pub blocks: Vec<BlockRecord>,
    /// Input normalisation fitted on the training tiles.
    pub stats: Option<ChannelStats>,
}

impl Checkpoint {
    pub fn from_network(net: &Network<f32>, stats: Option<ChannelStats>) -> Self {
        let mut blocks = Vec::new();
        net.visit(&mut |b: &ParamBlock<f32>| {
            blocks.push(BlockRecord {
                id: b.id(),
                name: b.name().to_string(),
                shape: b.weight.shape(),
                weights: b.weight.data().to_vec(),
                bias: b.bias.clone(),
            })
        });
        Checkpoint {
            arch: net.id(),
            in_channels: net.in_channels(),
            config: *net.config(),
            blocks,
            stats,
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.weights.len() + b.bias.len()).sum()
    }

    /// Copy stored values into a network of the same layout.
    pub fn load_into(&self, net: &mut Network<f32>) -> Result<()> {
        let mut it = self.blocks.iter();
        let mut err = None;
        net.visit_mut(&mut |b: &mut ParamBlock<f32>| {
            if err.is_some() {
                return;
            }
            match it.next() {
                Some(r) if r.name == b.name() && r.shape == b.weight.shape() && r.bias.len() == b.bias.len() => {
                    b.weight.data_mut().copy_from_slice(&r.weights);
                    b.bias.copy_from_slice(&r.bias);
                }
                Some(r) => err = Some(format!("stored block {} does not match {}", r.name, b.name())),
                None => err = Some(format!("no stored block for {}", b.name())),
            }
        });
        if let Some(e) = err {
            return Err(Error::invalid("checkpoint", e));
        }
        if it.next().is_some() {
            return Err(Error::invalid("checkpoint", "more stored blocks than network blocks"));
        }
        Ok(())
    }

    /// Rebuild the network this checkpoint was taken from.
    pub fn to_network(&self) -> Result<Network<f32>> {
        let mut net = build(self.arch, self.in_channels, &self.config, 0)?;
        self.load_into(&mut net)?;
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&CHECKPOINT_MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(self.arch.code());
        b.push(0);
        b.extend_from_slice(&(self.in_channels as u32).to_le_bytes());
        let cfg = self.config.to_kv().to_string();
        b.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        b.extend_from_slice(cfg.as_bytes());
        b.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for blk in &self.blocks {
            b.extend_from_slice(&blk.id.to_le_bytes());
            b.extend_from_slice(&(blk.name.len() as u16).to_le_bytes());
            b.extend_from_slice(blk.name.as_bytes());
            for d in blk.shape.dims() {
                b.extend_from_slice(&(d as u32).to_le_bytes());
            }
            b.extend_from_slice(&(blk.bias.len() as u32).to_le_bytes());
            for v in blk.weights.iter().chain(&blk.bias) {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        match &self.stats {
            None => b.push(0),
            Some(s) => {
                b.push(1);
                b.extend_from_slice(&(s.mean.len() as u32).to_le_bytes());
                for v in s.mean.iter().chain(&s.std) {
                    b.extend_from_slice(&v.to_le_bytes());
                }
                b.extend(s.floored.iter().map(|&f| u8::from(f)));
            }
        }
        seal(b)
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let invalid = |m: String| format_err(path, FormatError::Invalid(m));
        let mut r = Reader::new(bytes, path);
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != CHECKPOINT_MAGIC {
            return Err(format_err(
                path,
                FormatError::BadMagic {
                    expected: CHECKPOINT_MAGIC,
                    found: magic,
                },
            ));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(format_err(path, FormatError::UnsupportedVersion(version)));
        }
        let body = verify_crc(bytes, path, 6)?;
        let mut r = Reader::new(&body[6..], path);
        let code = r.u8()?;
        let arch = ArchitectureId::from_code(code).ok_or_else(|| invalid(format!("architecture code {code}")))?;
        r.u8()?;
        let in_channels = r.u32()? as usize;
        let cfg_len = r.u32()? as usize;
        let cfg_text = std::str::from_utf8(r.take(cfg_len)?).map_err(|e| invalid(e.to_string()))?;
        let config = KvMap::parse(cfg_text)
            .and_then(|m| ArchConfig::default().with_kv(&m))
            .map_err(|e| invalid(e.to_string()))?;
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let id = r.u32()?;
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| invalid(e.to_string()))?;
            let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
            let shape = Shape::new(dims[0], dims[1], dims[2], dims[3]);
            let bias_len = r.u32()? as usize;
            let weights = r.f32s(shape.len())?;
            let bias = r.f32s(bias_len)?;
            blocks.push(BlockRecord { id, name, shape, weights, bias });
        }
        let stats = match r.u8()? {
            0 => None,
            1 => {
                let c = r.u32()? as usize;
                let mean = r.f64s(c)?;
                let std = r.f64s(c)?;
                let floored = r.take(c)?.iter().map(|&f| f != 0).collect();
                Some(ChannelStats { mean, std, floored })
            }
            f => return Err(invalid(format!("statistics flag {f}"))),
        };
        if r.remaining() != 0 {
            return Err(format_err(path, FormatError::DimMismatch(format!("{} trailing bytes", r.remaining()))));
        }
        Ok(Checkpoint {
            arch,
            in_channels,
            config,
            blocks,
            stats,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, &path.display().to_string())
    }
}

impl BlockRecord {
    pub fn weight_tensor(&self) -> Result<Tensor<f32>> {
        Tensor::from_vec(self.shape, self.weights.clone())
    }
}

//! Per-command run manifest. It records what is needed to repeat a run:
//! the resolved configuration, seed, versions, thread settings and the
//! CRC32 of every input file. It carries no timestamps, so deterministic
//! reruns produce identical manifests.

use std::path::Path;

use rrcnn_core::kv::KvMap;
use rrcnn_core::{Error, Result};

pub struct Manifest {
    record: KvMap,
    inputs: usize,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &KvMap) -> Self {
        let mut record = KvMap::new();
        record.set("command", command);
        record.set("version", env!("CARGO_PKG_VERSION"));
        record.set("format_version", rrcnn_core::formats::VERSION);
        record.set("seed", seed);
        record.set("deterministic", rrcnn_core::par::deterministic());
        record.set("parallel_build", cfg!(feature = "parallel"));
        record.nest("config", config);
        Manifest { record, inputs: 0 }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.record.set(key, value);
    }

    /// Record `path` with its size and checksum.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let k = self.inputs;
        self.inputs += 1;
        self.record.set(&format!("input.{k}.name"), name);
        self.record.set(&format!("input.{k}.path"), path.display());
        self.record.set(&format!("input.{k}.bytes"), bytes.len());
        self.record.set(&format!("input.{k}.crc32"), format!("{:08x}", crc32fast::hash(&bytes)));
        Ok(())
    }

    pub fn record(&self) -> &KvMap {
        &self.record
    }

    /// Write `manifest-<command>.txt` and `config-<command>.txt` (the
    /// configuration alone, reusable with `--config`) under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let command = self.record.get_str("command").unwrap_or("run");
        write_text(&dir.join(format!("manifest-{command}.txt")), &self.record.to_string())?;
        write_text(&dir.join(format!("config-{command}.txt")), &self.record.section("config").to_string())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    if dir.as_os_str().is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

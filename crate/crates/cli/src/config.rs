//! Run configuration: a flat `key = value` map resolved from four layers,
//! later layers winning:
//!
//! 1. built-in defaults,
//! 2. the file given with `--config`,
//! 3. the environment (`RRCNN_THREADS` and `RRCNN_OUT` only),
//! 4. command-line flags (`--set key=value` and the named shortcuts).
//!
//! Keys under `net.` override the network layout and keys under `synth.`
//! configure the scene generator.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rrcnn_core::arch::{ArchConfig, ArchitectureId};
use rrcnn_core::data::TemporalMode;
use rrcnn_core::experiment::Experiment;
use rrcnn_core::kv::KvMap;
use rrcnn_core::synth::SceneConfig;
use rrcnn_core::{Error, Result};

pub const ENV_THREADS: &str = "RRCNN_THREADS";
pub const ENV_OUT: &str = "RRCNN_OUT";

/// Top-level keys with their defaults. An empty default means "derived".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("arch", "rrcnn1"),
    ("mode", "multitemporal"),
    ("out", "run"),
    ("raster", ""),
    ("labels", ""),
    ("fold", "all"),
    ("folds", "6"),
    ("fold_seed", "0"),
    ("seed", "0"),
    ("tile_h", "961"),
    ("tile_w", "932"),
    ("patch_size", "128"),
    ("train_stride", ""),
    ("eval_stride", "128"),
    ("augment", "true"),
    ("val_fraction", "0.2"),
    ("width_divisor", "1"),
    ("learning_rate", "0.001"),
    ("beta1", "0.9"),
    ("beta2", "0.999"),
    ("epsilon", "1e-7"),
    ("batch_size", "32"),
    ("patience", "10"),
    ("max_epochs", "500"),
    ("class_weights", "0.2,0.8"),
    ("threads", "0"),
    ("deterministic", "false"),
];

const SECTIONS: [&str; 2] = ["net.", "synth."];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldSelection {
    One(usize),
    All,
}

impl FoldSelection {
    pub fn folds(self, total: usize) -> Vec<usize> {
        match self {
            FoldSelection::One(k) => vec![k],
            FoldSelection::All => (0..total).collect(),
        }
    }
}

impl FromStr for FoldSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(FoldSelection::All);
        }
        s.parse().map(FoldSelection::One).map_err(|_| format!("fold must be an index or \"all\", got {s:?}"))
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub out: PathBuf,
    pub raster: PathBuf,
    pub labels: PathBuf,
    pub fold: FoldSelection,
    pub seed: u64,
    pub experiment: Experiment,
    pub scene: SceneConfig,
    /// 0 lets the thread pool pick.
    pub threads: usize,
    pub deterministic: bool,
    /// Every resolved key, defaults included, in a stable order.
    pub resolved: KvMap,
}

/// Layers that sit above the defaults, in increasing precedence.
#[derive(Clone, Debug, Default)]
pub struct Layers {
    pub file: Option<PathBuf>,
    pub env: Vec<(String, String)>,
    pub flags: KvMap,
}

impl Layers {
    /// The environment overrides this process would apply.
    pub fn env_from_process() -> Vec<(String, String)> {
        [(ENV_THREADS, "threads"), (ENV_OUT, "out")]
            .into_iter()
            .filter_map(|(var, key)| std::env::var(var).ok().map(|v| (key.to_string(), v)))
            .collect()
    }
}

fn defaults() -> KvMap {
    let mut m = KvMap::new();
    for (k, v) in DEFAULTS {
        m.set(k, v);
    }
    m
}

fn known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key) || SECTIONS.iter().any(|p| key.starts_with(p))
}

/// Merge the layers and validate the result.
pub fn resolve(layers: &Layers) -> Result<RunConfig> {
    let mut merged = defaults();
    if let Some(path) = &layers.file {
        merged.overlay(&KvMap::read(path)?);
    }
    for (k, v) in &layers.env {
        merged.set(k, v);
    }
    merged.overlay(&layers.flags);
    if let Some(k) = merged.keys().find(|k| !known(k)) {
        return Err(Error::Config(format!("unknown key {k:?}")));
    }
    RunConfig::from_kv(merged)
}

fn parse<T: FromStr>(m: &KvMap, key: &str) -> Result<T> {
    let raw = m.get_str(key).unwrap_or_default();
    raw.parse().map_err(|_| Error::Config(format!("{key} = {raw:?} is not valid")))
}

fn parse_bool(m: &KvMap, key: &str) -> Result<bool> {
    match m.get_str(key).unwrap_or_default() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key} = {other:?} is not a boolean"))),
    }
}

impl RunConfig {
    fn from_kv(mut m: KvMap) -> Result<Self> {
        let arch: ArchitectureId = parse(&m, "arch")?;
        let mode: TemporalMode = parse(&m, "mode")?;
        let out = PathBuf::from(m.get_str("out").unwrap_or_default());
        if out.as_os_str().is_empty() {
            return Err(Error::Config("out must not be empty".into()));
        }
        // Derived defaults are written back so the snapshot is complete.
        for (key, file) in [("raster", "scene.sarc"), ("labels", "labels.sarl")] {
            if m.get_str(key).unwrap_or_default().is_empty() {
                m.set(key, out.join(file).display());
            }
        }
        let raster = PathBuf::from(m.get_str("raster").unwrap_or_default());
        let labels = PathBuf::from(m.get_str("labels").unwrap_or_default());
        let fold: FoldSelection = m
            .get_str("fold")
            .unwrap_or_default()
            .parse()
            .map_err(Error::Config)?;
        let seed: u64 = parse(&m, "seed")?;

        let divisor: usize = parse(&m, "width_divisor")?;
        if divisor == 0 {
            return Err(Error::Config("width_divisor must be at least 1".into()));
        }
        let arch_config = ArchConfig::reconciled(arch).narrowed(divisor).with_kv(&m.section("net"))?;
        arch_config.validate()?;

        let mut e = Experiment::new(arch, mode);
        e.arch_config = arch_config;
        e.folds = parse(&m, "folds")?;
        e.fold_seed = parse(&m, "fold_seed")?;
        e.tile_h = parse(&m, "tile_h")?;
        e.tile_w = parse(&m, "tile_w")?;
        e.patch_size = parse(&m, "patch_size")?;
        e.train_stride = match m.get_str("train_stride").unwrap_or_default() {
            "" => None,
            _ => Some(parse(&m, "train_stride")?),
        };
        e.eval_stride = parse(&m, "eval_stride")?;
        e.augment = parse_bool(&m, "augment")?;
        e.val_fraction = parse(&m, "val_fraction")?;
        e.init_seed = seed;
        let t = &mut e.train;
        t.optim.learning_rate = parse(&m, "learning_rate")?;
        t.optim.beta1 = parse(&m, "beta1")?;
        t.optim.beta2 = parse(&m, "beta2")?;
        t.optim.epsilon = parse(&m, "epsilon")?;
        t.optim.batch_size = parse(&m, "batch_size")?;
        t.patience = parse(&m, "patience")?;
        t.max_epochs = parse(&m, "max_epochs")?;
        t.loss.class_weights = m.get_list("class_weights")?.unwrap_or_default();
        t.seed = seed;
        let deterministic = parse_bool(&m, "deterministic")?;
        t.deterministic = deterministic;

        if e.folds == 0 {
            return Err(Error::Config("folds must be at least 1".into()));
        }
        if let FoldSelection::One(k) = fold {
            if k >= e.folds {
                return Err(Error::Config(format!("fold {k} outside 0..{}", e.folds)));
            }
        }
        if e.patch_size == 0 || e.patch_size % 8 != 0 {
            return Err(Error::Config(format!("patch_size {} must be a positive multiple of 8", e.patch_size)));
        }
        if e.eval_stride == 0 || e.train_stride == Some(0) {
            return Err(Error::Config("strides must be positive".into()));
        }
        if e.tile_h < e.patch_size || e.tile_w < e.patch_size {
            return Err(Error::Config(format!(
                "tile {}x{} is smaller than patch {}",
                e.tile_h, e.tile_w, e.patch_size
            )));
        }
        if !(0.0..1.0).contains(&e.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} outside [0, 1)", e.val_fraction)));
        }
        if t.optim.batch_size == 0 || t.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if t.loss.class_weights.len() != arch_config.classes || t.loss.class_weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config(format!(
                "class_weights needs {} non-negative values",
                arch_config.classes
            )));
        }

        // The scene seed follows the run seed unless set explicitly.
        let scene = SceneConfig { seed, ..SceneConfig::default() }.with_kv(&m.section("synth"))?;
        scene.validate()?;

        Ok(RunConfig {
            out,
            raster,
            labels,
            fold,
            seed,
            threads: parse(&m, "threads")?,
            deterministic,
            experiment: e,
            scene,
            resolved: m,
        })
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.out.join(format!("fold{fold}"))
    }

    pub fn checkpoint_path(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("model.rrcw")
    }

    pub fn probs_dir(&self) -> PathBuf {
        self.out.join("probs")
    }

    pub fn tile_probs_path(&self, tile: usize) -> PathBuf {
        self.probs_dir().join(format!("tile{tile:03}.sarc"))
    }

    pub fn prediction_path(&self) -> PathBuf {
        self.out.join("prediction.sarl")
    }
}

/// Fail with a config error naming `what` when `path` does not exist.
pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

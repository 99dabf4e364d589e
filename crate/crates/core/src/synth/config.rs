use crate::error::{Error, Result};
use crate::kv::KvMap;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub timesteps: usize,
    /// Share of the scene that is forest at the first acquisition
    /// (including pixels later cleared).
    pub forest_fraction: f64,
    /// Share of the scene cleared before the first acquisition.
    pub past_fraction: f64,
    /// Share of the scene cleared during the sequence.
    pub deforestation_fraction: f64,
    /// Mean backscatter (VV, VH) in dB.
    pub forest_db: [f64; 2],
    pub pasture_db: [f64; 2],
    pub past_db: [f64; 2],
    /// Drop at the event time, in dB below the forest level.
    pub drop_db: f64,
    /// Recovery per step after the event, in dB.
    pub recovery_db: f64,
    pub looks: f64,
    /// Box radius of the smoothing applied to landcover noise.
    pub blob_radius: usize,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            height: 256,
            width: 256,
            timesteps: 7,
            forest_fraction: 0.6,
            past_fraction: 0.1,
            deforestation_fraction: 0.05,
            forest_db: [-7.0, -12.0],
            pasture_db: [-10.5, -16.5],
            past_db: [-9.5, -15.0],
            drop_db: 3.0,
            recovery_db: 1.0,
            looks: 4.0,
            blob_radius: 6,
            seed: 0,
        }
    }
}

const KEYS: [&str; 14] = [
    "height",
    "width",
    "timesteps",
    "forest_fraction",
    "past_fraction",
    "deforestation_fraction",
    "forest_db",
    "pasture_db",
    "past_db",
    "drop_db",
    "recovery_db",
    "looks",
    "blob_radius",
    "seed",
];

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.height == 0 || self.width == 0 {
            return bad("scene must be at least 1x1".into());
        }
        if self.timesteps < 2 {
            return bad(format!("timesteps must be at least 2, got {}", self.timesteps));
        }
        for (name, v) in [
            ("forest_fraction", self.forest_fraction),
            ("past_fraction", self.past_fraction),
            ("deforestation_fraction", self.deforestation_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.forest_fraction + self.past_fraction > 1.0 {
            return bad("forest_fraction + past_fraction exceeds 1".into());
        }
        if self.deforestation_fraction > self.forest_fraction {
            return bad("deforestation_fraction exceeds forest_fraction".into());
        }
        if self.looks < 1.0 {
            return bad(format!("looks must be at least 1, got {}", self.looks));
        }
        if self.drop_db < 0.0 || self.recovery_db < 0.0 {
            return bad("drop_db and recovery_db must be non-negative".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let pair = |v: [f64; 2]| format!("{},{}", v[0], v[1]);
        let mut m = KvMap::new();
        m.set("height", self.height);
        m.set("width", self.width);
        m.set("timesteps", self.timesteps);
        m.set("forest_fraction", self.forest_fraction);
        m.set("past_fraction", self.past_fraction);
        m.set("deforestation_fraction", self.deforestation_fraction);
        m.set("forest_db", pair(self.forest_db));
        m.set("pasture_db", pair(self.pasture_db));
        m.set("past_db", pair(self.past_db));
        m.set("drop_db", self.drop_db);
        m.set("recovery_db", self.recovery_db);
        m.set("looks", self.looks);
        m.set("blob_radius", self.blob_radius);
        m.set("seed", self.seed);
        m
    }

    /// Keys present in `m` override `self`.
    pub fn with_kv(mut self, m: &KvMap) -> Result<Self> {
        m.reject_unknown(&KEYS)?;
        let pair = |key: &str| -> Result<Option<[f64; 2]>> {
            match m.get_list::<f64>(key)? {
                None => Ok(None),
                Some(v) => <[f64; 2]>::try_from(v)
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{key} needs VV,VH values"))),
            }
        };
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = m.get(stringify!($f))? {
                    self.$f = v;
                }
            )*};
        }
        take!(
            height,
            width,
            timesteps,
            forest_fraction,
            past_fraction,
            deforestation_fraction,
            drop_db,
            recovery_db,
            looks,
            blob_radius,
            seed
        );
        if let Some(v) = pair("forest_db")? {
            self.forest_db = v;
        }
        if let Some(v) = pair("pasture_db")? {
            self.pasture_db = v;
        }
        if let Some(v) = pair("past_db")? {
            self.past_db = v;
        }
        self.validate()?;
        Ok(self)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::SceneConfig;
use crate::data::{LabelRaster, RasterStack, LABEL_DEFORESTATION, LABEL_NO_CHANGE, LABEL_PAST};
use crate::error::{Error, Result};
use crate::kv::KvMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cover {
    Forest,
    Pasture,
    Past,
    /// Forest cleared at the given timestep.
    Event(u8),
}

impl Cover {
    fn label(self) -> u8 {
        match self {
            Cover::Forest | Cover::Pasture => LABEL_NO_CHANGE,
            Cover::Past => LABEL_PAST,
            Cover::Event(_) => LABEL_DEFORESTATION,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub stack: RasterStack,
    pub labels: LabelRaster,
    pub cover: Vec<Cover>,
}

/// Speckle-free level in dB of a pixel with the given cover at step `t`
/// for polarisation `pol` (0 = VV, 1 = VH).
pub fn expected_db(cfg: &SceneConfig, cover: Cover, t: usize, pol: usize) -> f64 {
    match cover {
        Cover::Forest => cfg.forest_db[pol],
        Cover::Pasture => cfg.pasture_db[pol],
        Cover::Past => cfg.past_db[pol],
        Cover::Event(ts) => {
            let forest = cfg.forest_db[pol];
            let ts = usize::from(ts);
            if t < ts {
                forest
            } else {
                (forest - cfg.drop_db + cfg.recovery_db * (t - ts) as f64).min(forest)
            }
        }
    }
}

/// Standard-normal noise smoothed by three passes of a `(2r+1)`-wide box
/// filter along each axis, with clamped edges.
pub fn smooth_field<R: Rng + ?Sized>(h: usize, w: usize, radius: usize, rng: &mut R) -> Vec<f64> {
    let mut f: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
    if radius == 0 {
        return f;
    }
    let mut tmp = vec![0.0; h * w];
    let r = radius as isize;
    let norm = (2 * radius + 1) as f64;
    for _ in 0..3 {
        for i in 0..h {
            for j in 0..w {
                let mut s = 0.0;
                for d in -r..=r {
                    let jj = (j as isize + d).clamp(0, w as isize - 1) as usize;
                    s += f[i * w + jj];
                }
                tmp[i * w + j] = s / norm;
            }
        }
        for i in 0..h {
            for j in 0..w {
                let mut s = 0.0;
                for d in -r..=r {
                    let ii = (i as isize + d).clamp(0, h as isize - 1) as usize;
                    s += tmp[ii * w + j];
                }
                f[i * w + j] = s / norm;
            }
        }
    }
    f
}

/// Indices of the `k` largest field values among `candidates`, ties broken
/// by index.
fn top_k(field: &[f64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut c = candidates.to_vec();
    c.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
    c.truncate(k);
    c
}

/// 4-connected components of `mask`, as lists of pixel indices in scan order.
fn components(mask: &[bool], h: usize, w: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(q) = stack.pop() {
            comp.push(q);
            let (i, j) = (q / w, q % w);
            let mut visit = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(q - w);
            }
            if i + 1 < h {
                visit(q + w);
            }
            if j > 0 {
                visit(q - 1);
            }
            if j + 1 < w {
                visit(q + 1);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn generate(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let (h, w, d) = (cfg.height, cfg.width, cfg.timesteps);
    let n = h * w;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let all: Vec<usize> = (0..n).collect();
    let forest_field = smooth_field(h, w, cfg.blob_radius, &mut rng);
    let n_forest = (cfg.forest_fraction * n as f64).round() as usize;
    let mut cover = vec![Cover::Pasture; n];
    for q in top_k(&forest_field, &all, n_forest) {
        cover[q] = Cover::Forest;
    }
    let open: Vec<usize> = all.iter().copied().filter(|&q| cover[q] == Cover::Pasture).collect();
    let past_field = smooth_field(h, w, cfg.blob_radius, &mut rng);
    let n_past = ((cfg.past_fraction * n as f64).round() as usize).min(open.len());
    for q in top_k(&past_field, &open, n_past) {
        cover[q] = Cover::Past;
    }
    let forest: Vec<usize> = all.iter().copied().filter(|&q| cover[q] == Cover::Forest).collect();
    let event_field = smooth_field(h, w, cfg.blob_radius, &mut rng);
    let n_event = ((cfg.deforestation_fraction * n as f64).round() as usize).min(forest.len());
    let mut mask = vec![false; n];
    for q in top_k(&event_field, &forest, n_event) {
        mask[q] = true;
    }
    for comp in components(&mask, h, w) {
        let ts = rng.random_range(1..d) as u8;
        for q in comp {
            cover[q] = Cover::Event(ts);
        }
    }

    let gamma = Gamma::new(cfg.looks, 1.0 / cfg.looks).map_err(|e| Error::Config(e.to_string()))?;
    let mut data = Vec::with_capacity(2 * d * n);
    for t in 0..d {
        for pol in 0..2 {
            for &c in &cover {
                let linear = 10f64.powf(expected_db(cfg, c, t, pol) / 10.0) * gamma.sample(&mut rng);
                data.push((10.0 * linear.log10()) as f32);
            }
        }
    }
    let tags = (0..d).map(|t| format!("t{t}")).collect();
    let stack = RasterStack::new(h, w, data, tags)?;
    let labels = LabelRaster::new(h, w, cover.iter().map(|c| c.label()).collect())?;
    Ok(Scene { stack, labels, cover })
}

/// Self-describing record: the config under `config.`, realised class
/// fractions under `realized.` and per-class, per-channel dB statistics
/// under `stats.`.
pub fn describe(cfg: &SceneConfig, scene: &Scene) -> KvMap {
    let mut m = KvMap::new();
    m.nest("config", &cfg.to_kv());
    let n = scene.cover.len() as f64;
    let count = |f: &dyn Fn(Cover) -> bool| scene.cover.iter().filter(|&&c| f(c)).count();
    let forest = count(&|c| matches!(c, Cover::Forest | Cover::Event(_)));
    let events = count(&|c| matches!(c, Cover::Event(_)));
    let past = count(&|c| c == Cover::Past);
    m.set("realized.forest_fraction", forest as f64 / n);
    m.set("realized.deforestation_fraction", events as f64 / n);
    m.set("realized.past_fraction", past as f64 / n);
    m.set("realized.pasture_fraction", (n as usize - forest - past) as f64 / n);
    let classes: [(&str, &dyn Fn(Cover) -> bool); 4] = [
        ("forest", &|c| c == Cover::Forest),
        ("pasture", &|c| c == Cover::Pasture),
        ("past", &|c| c == Cover::Past),
        ("deforestation", &|c| matches!(c, Cover::Event(_))),
    ];
    for (name, member) in classes {
        for ch in 0..scene.stack.channels() {
            let plane = scene.stack.channel(ch);
            let vals: Vec<f64> = plane
                .iter()
                .zip(&scene.cover)
                .filter(|(_, &c)| member(c))
                .map(|(&v, _)| f64::from(v))
                .collect();
            if vals.is_empty() {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            m.set(&format!("stats.{name}.c{ch}.mean"), format!("{mean:.4}"));
            m.set(&format!("stats.{name}.c{ch}.std"), format!("{:.4}", var.sqrt()));
        }
    }
    m
}

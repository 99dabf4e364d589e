//! Central-difference gradient check for any [`Layer`] in 64-bit precision.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, ParamBlock};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tolerance: f64,
    /// Coordinates probed per parameter block (all of them if fewer).
    pub samples_per_block: usize,
    /// Input coordinates probed (all of them if fewer); 0 skips the input
    /// gradient.
    pub input_samples: usize,
    pub seed: u64,
    /// When set, each coordinate is also differenced at `eps / 2`; if the
    /// two estimates differ by more than this fraction of their magnitude,
    /// the step crossed a kink (a ReLU or max-pool switch) and the
    /// coordinate is left out. A wrong analytic gradient cannot trigger
    /// this, since only numeric estimates are compared.
    pub kink_guard: Option<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-4,
            tolerance: 1e-6,
            samples_per_block: 50,
            input_samples: usize::MAX,
            seed: 7,
            kink_guard: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockResult {
    pub name: String,
    pub checked: usize,
    /// Coordinates dropped by the kink guard.
    pub skipped: usize,
    pub rel_err: f64,
    /// Norms of the analytic samples, the numeric samples and their
    /// difference, kept so errors can be pooled across blocks.
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    pub diff_norm: f64,
}

impl BlockResult {
    fn new(name: String, pairs: &[(f64, Option<f64>)]) -> Self {
        let (analytic, numeric): (Vec<f64>, Vec<f64>) = pairs.iter().filter_map(|&(a, n)| n.map(|n| (a, n))).unzip();
        let (analytic, numeric) = (&analytic[..], &numeric[..]);
        let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        BlockResult {
            checked: numeric.len(),
            skipped: pairs.len() - numeric.len(),
            rel_err: relative_error(analytic, numeric),
            analytic_norm: norm(&mut analytic.iter().copied()),
            numeric_norm: norm(&mut numeric.iter().copied()),
            diff_norm: norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b)),
            name,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockResult>,
    /// The input gradient, if probed.
    pub input: Option<BlockResult>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<(&str, f64)> {
        let blocks = self.blocks.iter().map(|b| (b.name.as_str(), b.rel_err));
        let input = self.input.as_ref().map(|b| ("input", b.rel_err));
        blocks.chain(input).fold(None, |acc, (n, e)| match acc {
            Some((_, best)) if best >= e => acc,
            _ => Some((n, e)),
        })
    }

    pub fn max_rel_err(&self) -> f64 {
        self.worst().map_or(0.0, |(_, e)| e)
    }

    /// Relative error of every sampled coordinate pooled into one vector,
    /// so each block weighs in by the size of its gradient.
    pub fn pooled_rel_err(&self) -> f64 {
        let all = self.blocks.iter().chain(self.input.as_ref());
        let (mut a, mut n, mut d) = (0.0, 0.0, 0.0);
        for b in all {
            a += b.analytic_norm * b.analytic_norm;
            n += b.numeric_norm * b.numeric_norm;
            d += b.diff_norm * b.diff_norm;
        }
        let scale = a.sqrt().max(n.sqrt());
        if scale == 0.0 {
            0.0
        } else {
            d.sqrt() / scale
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= self.tolerance
    }

    /// `Err(GradCheck)` naming the worst block when the tolerance is breached.
    pub fn into_result(self) -> Result<Self> {
        match self.worst() {
            Some((name, e)) if e > self.tolerance => Err(Error::GradCheck {
                block: name.to_string(),
                rel_err: e,
                tolerance: self.tolerance,
            }),
            _ => Ok(self),
        }
    }
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compare analytic gradients of the scalar `sum(probe * layer(x))` with
/// central differences, block by block. The probe is a fixed random tensor
/// so every output element contributes.
pub fn grad_check<L: Layer<f64> + ?Sized>(layer: &mut L, x: &Tensor<f64>, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    layer.clear_cache();
    let y = layer.forward(x, Mode::Infer)?;
    let probe = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
    let objective = |layer: &mut L, x: &Tensor<f64>| -> Result<f64> {
        layer.forward(x, Mode::Infer)?.dot(&probe)
    };

    layer.visit_mut(&mut |b: &mut ParamBlock<f64>| b.zero_grad());
    layer.forward(x, Mode::Train)?;
    let gx = layer.backward(&probe)?;

    let mut names = Vec::new();
    let mut analytic = Vec::new();
    let mut coords = Vec::new();
    layer.visit(&mut |b: &ParamBlock<f64>| {
        let picks: Vec<usize> = if b.len() <= cfg.samples_per_block {
            (0..b.len()).collect()
        } else {
            sample(&mut rng, b.len(), cfg.samples_per_block).into_vec()
        };
        names.push(b.name().to_string());
        analytic.push(picks.iter().map(|&i| b.grad(i)).collect::<Vec<_>>());
        coords.push(picks);
    });

    let mut blocks = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let mut pairs = Vec::with_capacity(coords[k].len());
        for (j, &i) in coords[k].iter().enumerate() {
            let orig = nth_block_get(layer, k, i);
            let numeric = derivative(cfg, |d| {
                nth_block_set(layer, k, i, orig + d);
                let v = objective(layer, x);
                nth_block_set(layer, k, i, orig);
                v
            })?;
            pairs.push((analytic[k][j], numeric));
        }
        blocks.push(BlockResult::new(name, &pairs));
    }

    let input = if cfg.input_samples > 0 {
        let n = cfg.input_samples.min(x.len());
        let picks = sample(&mut rng, x.len(), n).into_vec();
        let mut xp = x.clone();
        let mut pairs = Vec::with_capacity(n);
        for &i in &picks {
            let orig = xp.data()[i];
            let numeric = derivative(cfg, |d| {
                xp.data_mut()[i] = orig + d;
                let v = objective(layer, &xp);
                xp.data_mut()[i] = orig;
                v
            })?;
            pairs.push((gx.data()[i], numeric));
        }
        Some(BlockResult::new("input".into(), &pairs))
    } else {
        None
    };

    Ok(GradCheckReport {
        blocks,
        input,
        tolerance: cfg.tolerance,
    })
}

/// Central difference of `f` at offset 0; `None` when the kink guard
/// rejects the coordinate.
fn derivative(cfg: &GradCheckConfig, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Option<f64>> {
    // (difference, largest |f| seen), the latter bounding roundoff
    let mut central = |h: f64| -> Result<(f64, f64)> {
        let (up, down) = (f(h)?, f(-h)?);
        Ok(((up - down) / (2.0 * h), up.abs().max(down.abs())))
    };
    let (d, fmax) = central(cfg.eps)?;
    match cfg.kink_guard {
        None => Ok(Some(d)),
        Some(guard) => {
            let (half, fmax_half) = central(cfg.eps / 2.0)?;
            let noise = 16.0 * f64::EPSILON * fmax.max(fmax_half) / cfg.eps;
            let allowed = guard * d.abs().max(half.abs()) + noise;
            Ok(((d - half).abs() <= allowed).then_some(d))
        }
    }
}

fn nth_block_get<L: Layer<f64> + ?Sized>(layer: &L, k: usize, i: usize) -> f64 {
    let mut seen = 0;
    let mut out = 0.0;
    layer.visit(&mut |b: &ParamBlock<f64>| {
        if seen == k {
            out = b.get(i);
        }
        seen += 1;
    });
    out
}

fn nth_block_set<L: Layer<f64> + ?Sized>(layer: &mut L, k: usize, i: usize, v: f64) {
    let mut seen = 0;
    layer.visit_mut(&mut |b: &mut ParamBlock<f64>| {
        if seen == k {
            b.set(i, v);
        }
        seen += 1;
    });
}

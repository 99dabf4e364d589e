use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, OptimConfig};
use super::dataset::Dataset;
use super::early_stop::{EarlyStopping, StopDecision};
use super::history::{EpochRecord, History};
use super::loss::{wcce_loss, LossConfig};
use crate::arch::Network;
use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, ParamBlock};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optim: OptimConfig,
    pub loss: LossConfig,
    pub patience: usize,
    pub max_epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Write zero seconds to the history so reruns are byte-identical.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optim: OptimConfig::default(),
            loss: LossConfig::default(),
            patience: 10,
            max_epochs: 500,
            seed: 0,
            deterministic: false,
        }
    }
}

/// Drives mini-batch training of one network.
pub struct Trainer<'a> {
    net: &'a mut Network<f32>,
    cfg: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
    step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(net: &'a mut Network<f32>, cfg: TrainConfig) -> Self {
        Trainer {
            adam: Adam::new(cfg.optim.clone()),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            net,
            cfg,
            step: 0,
        }
    }

    pub fn network(&mut self) -> &mut Network<f32> {
        self.net
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    fn kept(&self, labels: &[u8]) -> usize {
        labels.iter().filter(|&&y| y != self.cfg.loss.ignore_label).count()
    }

    /// One pass over `data` in a freshly shuffled order. Returns the
    /// pixel-weighted mean training loss. Batches made only of ignored
    /// pixels are skipped.
    pub fn train_epoch(&mut self, data: &Dataset) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let bs = self.cfg.optim.batch_size.max(1);
        let (mut total, mut pixels) = (0.0, 0usize);
        for chunk in order.chunks(bs) {
            let batch = data.batch(chunk)?;
            let kept = self.kept(&batch.labels);
            if kept == 0 {
                continue;
            }
            self.net.zero_grad();
            let probs = self.net.forward(&batch.images, Mode::Train)?;
            let (loss, grad) = wcce_loss(&probs, &batch.labels, &self.cfg.loss)?;
            self.step += 1;
            if !loss.is_finite() {
                self.net.clear_cache();
                return Err(Error::Diverged { step: self.step, loss });
            }
            self.net.backward_logits(&grad)?;
            self.adam.step(&mut *self.net);
            total += loss * kept as f64;
            pixels += kept;
        }
        Ok(if pixels == 0 { f64::NAN } else { total / pixels as f64 })
    }

    /// Pixel-weighted mean loss over `data` without updating parameters.
    pub fn evaluate(&mut self, data: &Dataset) -> Result<f64> {
        let bs = self.cfg.optim.batch_size.max(1);
        let idx: Vec<usize> = (0..data.len()).collect();
        let (mut total, mut pixels) = (0.0, 0usize);
        for chunk in idx.chunks(bs) {
            let batch = data.batch(chunk)?;
            let kept = self.kept(&batch.labels);
            if kept == 0 {
                continue;
            }
            let probs = self.net.forward(&batch.images, Mode::Infer)?;
            let (loss, _) = wcce_loss(&probs, &batch.labels, &self.cfg.loss)?;
            total += loss * kept as f64;
            pixels += kept;
        }
        if pixels == 0 {
            return Err(Error::EmptyLossSupport);
        }
        Ok(total / pixels as f64)
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub history: History,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

type Snapshot = Vec<(Vec<f32>, Vec<f32>)>;

fn snapshot(net: &Network<f32>) -> Snapshot {
    let mut s = Vec::new();
    net.visit(&mut |b: &ParamBlock<f32>| s.push((b.weight.data().to_vec(), b.bias.clone())));
    s
}

fn restore(net: &mut Network<f32>, s: &Snapshot) {
    let mut it = s.iter();
    net.visit_mut(&mut |b: &mut ParamBlock<f32>| {
        if let Some((w, bias)) = it.next() {
            b.weight.data_mut().copy_from_slice(w);
            b.bias.copy_from_slice(bias);
        }
    });
}

/// Train with early stopping on validation loss, then restore the
/// parameters of the best epoch. `on_epoch` sees every record as it lands.
pub fn fit(
    net: &mut Network<f32>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    let mut trainer = Trainer::new(net, cfg.clone());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = History::default();
    let mut best = snapshot(trainer.net);
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let train_loss = trainer.train_epoch(train)?;
        let val_loss = trainer.evaluate(val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { step: trainer.steps(), loss: val_loss });
        }
        let seconds = if cfg.deterministic { 0.0 } else { start.elapsed().as_secs_f64() };
        let rec = EpochRecord { epoch, train_loss, val_loss, seconds };
        on_epoch(&rec);
        history.push(rec);
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best = snapshot(trainer.net),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    restore(trainer.net, &best);
    Ok(FitResult {
        history,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        best_val_loss: stopper.best(),
        stopped_early,
    })
}

/// Class probabilities for every image, computed in batches.
pub fn predict(net: &mut Network<f32>, images: &Tensor<f32>, batch_size: usize) -> Result<Tensor<f32>> {
    let s = images.shape();
    let mut out: Vec<f32> = Vec::with_capacity(s.n * net.classes() * s.plane());
    for start in (0..s.n).step_by(batch_size.max(1)) {
        let end = (start + batch_size.max(1)).min(s.n);
        let data = images.data()[start * s.sample()..end * s.sample()].to_vec();
        let x = Tensor::from_vec(Shape::new(end - start, s.c, s.h, s.w), data)?;
        out.extend_from_slice(net.forward(&x, Mode::Infer)?.data());
    }
    Tensor::from_vec(Shape::new(s.n, net.classes(), s.h, s.w), out)
}

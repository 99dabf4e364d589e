use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrcnn_core::arch::{build, ArchConfig, ArchitectureId, Network};
use rrcnn_core::error::{Error, Result};
use rrcnn_core::formats::Checkpoint;
use rrcnn_core::nn::{Layer, Mode, ParamBlock};
use rrcnn_core::ops::softmax_channels;
use rrcnn_core::train::{fit, wcce_loss, Adam, Dataset, EarlyStopping, LossConfig, OptimConfig, StopDecision, TrainConfig};
use rrcnn_core::{Shape, Tensor};

fn probs(pairs: &[(f64, f64)]) -> Tensor<f64> {
    // (p_no, p_def) per pixel, laid out as a (1, 2, 1, n) tensor
    let n = pairs.len();
    let mut data: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    data.extend(pairs.iter().map(|p| p.1));
    Tensor::from_vec(Shape::new(1, 2, 1, n), data).unwrap()
}

#[test]
fn weighted_loss_hand_values() {
    let cfg = LossConfig::default();
    let (loss, _) = wcce_loss(&probs(&[(0.0, 1.0)]), &[1], &cfg).unwrap();
    assert_eq!(loss, 0.0);
    let (loss, _) = wcce_loss(&probs(&[(0.5, 0.5)]), &[1], &cfg).unwrap();
    assert_eq!(loss, 0.8 * std::f64::consts::LN_2);
    assert!((loss - 0.55452).abs() < 5e-6);
    let (loss, _) = wcce_loss(&probs(&[(0.5, 0.5)]), &[0], &cfg).unwrap();
    assert_eq!(loss, 0.2 * std::f64::consts::LN_2);
}

#[test]
fn ignored_pixels_drop_out_of_loss_and_gradient() {
    let cfg = LossConfig::default();
    let (single, _) = wcce_loss(&probs(&[(0.3, 0.7)]), &[1], &cfg).unwrap();
    let (pair, grad) = wcce_loss(&probs(&[(0.3, 0.7), (0.9, 0.1)]), &[1, 2], &cfg).unwrap();
    assert_eq!(pair, single, "M counts kept pixels only");
    assert_eq!((grad.data()[1], grad.data()[3]), (0.0, 0.0));
    // moving the ignored pixel's prediction changes nothing
    let (moved, grad2) = wcce_loss(&probs(&[(0.3, 0.7), (0.2, 0.8)]), &[1, 2], &cfg).unwrap();
    assert_eq!(moved, pair);
    assert_eq!(grad2.data(), grad.data());
    assert!(matches!(
        wcce_loss(&probs(&[(0.5, 0.5), (0.5, 0.5)]), &[2, 2], &cfg),
        Err(Error::EmptyLossSupport)
    ));
}

#[test]
fn fused_gradient_matches_differences_through_softmax() {
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = Tensor::<f64>::randn(Shape::new(2, 2, 3, 3), 1.5, &mut rng);
    let labels: Vec<u8> = (0..18).map(|i| [0, 1, 2][i % 3]).collect();
    let loss_at = |z: &Tensor<f64>| wcce_loss(&softmax_channels(z), &labels, &cfg).unwrap().0;
    let (_, grad) = wcce_loss(&softmax_channels(&logits), &labels, &cfg).unwrap();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..logits.len() {
        let mut up = logits.clone();
        up.data_mut()[i] += eps;
        let mut down = logits.clone();
        down.data_mut()[i] -= eps;
        let numeric = (loss_at(&up) - loss_at(&down)) / (2.0 * eps);
        let a = grad.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn loss_is_non_negative_and_zero_only_when_exact() {
    let cfg = LossConfig::default();
    let (l, _) = wcce_loss(&probs(&[(1.0, 0.0), (0.0, 1.0)]), &[0, 1], &cfg).unwrap();
    assert_eq!(l, 0.0);
    let (l, _) = wcce_loss(&probs(&[(0.99, 0.01), (0.0, 1.0)]), &[0, 1], &cfg).unwrap();
    assert!(l > 0.0);
    // a zero probability is clamped, not infinite
    let (l, _) = wcce_loss(&probs(&[(1.0, 0.0)]), &[1], &cfg).unwrap();
    assert!(l.is_finite() && l > 0.0);
}

/// One scalar weight whose gradient the test sets directly.
struct Scalar {
    block: ParamBlock<f64>,
}

impl Scalar {
    fn new(v: f64) -> Self {
        let w = Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![v]).unwrap();
        Scalar {
            block: ParamBlock::new(0, "w", w, Vec::new()),
        }
    }
}

impl Layer<f64> for Scalar {
    fn kind(&self) -> &'static str {
        "scalar"
    }
    fn forward(&mut self, x: &Tensor<f64>, _: Mode) -> Result<Tensor<f64>> {
        Ok(x.clone())
    }
    fn backward(&mut self, g: &Tensor<f64>) -> Result<Tensor<f64>> {
        Ok(g.clone())
    }
    fn visit(&self, f: &mut dyn FnMut(&ParamBlock<f64>)) {
        f(&self.block)
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut ParamBlock<f64>)) {
        f(&mut self.block)
    }
    fn clear_cache(&mut self) {}
}

#[test]
fn adam_follows_the_hand_table() {
    let mut layer = Scalar::new(0.5);
    let mut adam = Adam::new(OptimConfig {
        learning_rate: 0.1,
        ..OptimConfig::default()
    });
    // theta after each step, worked by hand with b1 = 0.9, b2 = 0.999, eps = 1e-7
    let table = [(1.0, 0.400000009999999), (-2.0, 0.4366103603884889), (0.5, 0.4502794256602132)];
    for (g, want) in table {
        layer.block.grad_weight.data_mut()[0] = g;
        adam.step(&mut layer);
        assert!((layer.block.get(0) - want).abs() < 1e-15, "{} vs {want}", layer.block.get(0));
    }
    assert_eq!(adam.steps_taken(), 3);
}

#[test]
fn adam_zero_gradient_and_constant_gradient_limits() {
    let mut layer = Scalar::new(1.25);
    let mut adam = Adam::new(OptimConfig::default());
    for _ in 0..5 {
        adam.step(&mut layer);
    }
    assert_eq!(layer.block.get(0), 1.25);

    let mut layer = Scalar::new(0.0);
    let mut adam = Adam::new(OptimConfig::default());
    let mut prev = 0.0;
    for _ in 0..200 {
        layer.block.grad_weight.data_mut()[0] = 3.0;
        adam.step(&mut layer);
        let now = layer.block.get(0);
        assert!(((prev - now) - 1e-3).abs() < 1e-9, "step {}", prev - now);
        prev = now;
    }
}

#[test]
fn patience_stops_ten_epochs_after_the_best() {
    let mut stop = EarlyStopping::new(10);
    let losses = [1.0, 0.9].into_iter().chain(std::iter::repeat_n(0.91, 10));
    let mut last = None;
    for (i, v) in losses.enumerate() {
        last = Some((i + 1, stop.update(i + 1, v)));
    }
    assert_eq!(last, Some((12, StopDecision::Stop)));
    assert_eq!((stop.best(), stop.best_epoch()), (0.9, Some(2)));
}

fn tiny_sets(seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make = |rng: &mut ChaCha8Rng, n: usize| {
        let x = Tensor::<f32>::randn(Shape::new(n, 4, 8, 8), 1.0, rng);
        // deforestation where the first channel is high, so there is signal to learn
        let labels = (0..n)
            .flat_map(|k| {
                let s = x.sample(k)[..64].to_vec();
                s.into_iter().map(|v| u8::from(v > 0.3))
            })
            .collect();
        Dataset::plain(x, labels).unwrap()
    };
    (make(&mut rng, 6), make(&mut rng, 3))
}

fn small_net(seed: u64) -> Network<f32> {
    build(ArchitectureId::UNet, 4, &ArchConfig::reconciled(ArchitectureId::UNet).narrowed(16), seed).unwrap()
}

fn quick_config(patience: usize, epochs: usize) -> TrainConfig {
    TrainConfig {
        optim: OptimConfig {
            batch_size: 4,
            learning_rate: 1e-2,
            ..OptimConfig::default()
        },
        patience,
        max_epochs: epochs,
        seed: 42,
        deterministic: true,
        ..TrainConfig::default()
    }
}

#[test]
fn seeded_training_is_reproducible() {
    let (train, val) = tiny_sets(1);
    let run = || {
        let mut net = small_net(5);
        let r = fit(&mut net, &train, &val, &quick_config(10, 6), |_| {}).unwrap();
        (r.history.to_csv(), Checkpoint::from_network(&net, None).to_bytes())
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2);
    assert_eq!(c1, c2);
    assert!(h1.starts_with("epoch,train_loss,val_loss,seconds\n"));
    assert_eq!(h1.lines().count(), 7);
}

#[test]
fn fit_restores_the_best_validation_checkpoint() {
    let (train, val) = tiny_sets(2);
    let mut net = small_net(6);
    let r = fit(&mut net, &train, &val, &quick_config(2, 30), |_| {}).unwrap();
    let best = r.history.records.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_val_loss, best);
    assert!(r.history.records.iter().all(|e| e.val_loss >= r.best_val_loss));
    let mut net_copy = small_net(0);
    Checkpoint::from_network(&net, None).load_into(&mut net_copy).unwrap();
    let mut t = rrcnn_core::train::Trainer::new(&mut net_copy, quick_config(2, 30));
    let again = t.evaluate(&val).unwrap();
    assert!((again - best).abs() <= 1e-6 * best.max(1.0), "{again} vs {best}");
    if r.stopped_early {
        assert_eq!(r.history.len(), r.best_epoch + 2);
    }
}

#[test]
fn non_finite_loss_aborts_with_the_step() {
    let (mut train, val) = tiny_sets(3);
    let (x, labels) = {
        let b = train.batch(&[0, 1, 2, 3, 4, 5]).unwrap();
        (b.images, b.labels)
    };
    let mut poisoned = x.clone();
    poisoned.data_mut().iter_mut().for_each(|v| *v = f32::NAN);
    train = Dataset::plain(poisoned, labels).unwrap();
    let mut net = small_net(7);
    match fit(&mut net, &train, &val, &quick_config(2, 3), |_| {}) {
        Err(Error::Diverged { step, .. }) => assert_eq!(step, 1),
        other => panic!("{:?}", other.map(|r| r.best_epoch)),
    }
}

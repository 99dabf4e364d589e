//! Central finite-difference checks of every kernel backward in 64-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrcnn_core::ops::{self, Padding};
use rrcnn_core::{Shape, Tensor};

const EPS: f64 = 1e-4;

fn rel(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let d = a.zip_map(b, "rel", |x, y| x - y).unwrap().norm();
    d / a.norm().max(b.norm()).max(1e-300)
}

/// Numerical gradient of `x -> <probe, f(x)>`.
fn numeric(x: &Tensor<f64>, probe: &Tensor<f64>, f: impl Fn(&Tensor<f64>) -> Tensor<f64>) -> Tensor<f64> {
    let mut g = Tensor::zeros(x.shape());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + EPS;
        let lp = f(&xp).dot(probe).unwrap();
        xp.data_mut()[i] = orig - EPS;
        let lm = f(&xp).dot(probe).unwrap();
        xp.data_mut()[i] = orig;
        g.data_mut()[i] = (lp - lm) / (2.0 * EPS);
    }
    g
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for (padding, stride) in [(Padding::Same, 1), (Padding::Valid, 1), (Padding::Same, 2)] {
        let x = Tensor::<f64>::randn(Shape::new(1, 2, 4, 4), 1.0, &mut rng);
        let k = Tensor::<f64>::randn(Shape::new(3, 2, 3, 3), 0.5, &mut rng);
        let b = vec![0.1, -0.3, 0.2];
        let y = ops::conv2d(&x, &k, Some(&b), padding, stride).unwrap();
        let probe = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
        let g = ops::conv2d_backward(&x, &k, &probe, padding, stride).unwrap();

        let nx = numeric(&x, &probe, |x| ops::conv2d(x, &k, Some(&b), padding, stride).unwrap());
        let nk = numeric(&k, &probe, |k| ops::conv2d(&x, k, Some(&b), padding, stride).unwrap());
        assert!(rel(&g.x, &nx) <= 1e-6, "grad_x {padding:?}/{stride}: {}", rel(&g.x, &nx));
        assert!(rel(&g.k, &nk) <= 1e-6, "grad_k {padding:?}/{stride}: {}", rel(&g.k, &nk));
        for o in 0..3 {
            let want: f64 = (0..y.shape().plane()).map(|p| probe.data()[o * y.shape().plane() + p]).sum();
            assert!((g.b[o] - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn conv2d_gradients_f32_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let x = Tensor::<f64>::randn(Shape::new(2, 2, 5, 5), 1.0, &mut rng);
    let k = Tensor::<f64>::randn(Shape::new(2, 2, 3, 3), 0.5, &mut rng);
    let probe = Tensor::<f64>::randn(Shape::new(2, 2, 5, 5), 1.0, &mut rng);
    let g64 = ops::conv2d_backward(&x, &k, &probe, Padding::Same, 1).unwrap();
    let g32 = ops::conv2d_backward(&x.cast::<f32>(), &k.cast::<f32>(), &probe.cast::<f32>(), Padding::Same, 1).unwrap();
    assert!(rel(&g32.x.cast(), &g64.x) <= 1e-3);
    assert!(rel(&g32.k.cast(), &g64.k) <= 1e-3);
}

#[test]
fn conv_transpose_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let x = Tensor::<f64>::randn(Shape::new(2, 3, 3, 2), 1.0, &mut rng);
    let k = Tensor::<f64>::randn(Shape::new(3, 2, 3, 3), 0.5, &mut rng);
    let b = vec![0.4, -0.1];
    let y = ops::conv_transpose2d(&x, &k, Some(&b), 2).unwrap();
    assert_eq!(y.shape(), Shape::new(2, 2, 6, 4));
    let probe = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
    let g = ops::conv_transpose2d_backward(&x, &k, &probe, 2).unwrap();
    let nx = numeric(&x, &probe, |x| ops::conv_transpose2d(x, &k, Some(&b), 2).unwrap());
    let nk = numeric(&k, &probe, |k| ops::conv_transpose2d(&x, k, Some(&b), 2).unwrap());
    assert!(rel(&g.x, &nx) <= 1e-6);
    assert!(rel(&g.k, &nk) <= 1e-6);
    let total: f64 = probe.data()[..24].iter().sum::<f64>() + probe.data()[48..72].iter().sum::<f64>();
    assert!((g.b[0] - total).abs() <= 1e-12);
}

#[test]
fn pool_and_upsample_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let x = Tensor::<f64>::randn(Shape::new(1, 2, 4, 6), 1.0, &mut rng);
    let (y, map) = ops::maxpool2(&x).unwrap();
    let probe = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
    let g = ops::maxpool2_backward(&probe, &map).unwrap();
    let n = numeric(&x, &probe, |x| ops::maxpool2(x).unwrap().0);
    assert!(rel(&g, &n) <= 1e-6);

    let probe = Tensor::<f64>::randn(Shape::new(1, 2, 8, 12), 1.0, &mut rng);
    let g = ops::upsample_bilinear2_backward(&probe).unwrap();
    let n = numeric(&x, &probe, ops::upsample_bilinear2);
    assert!(rel(&g, &n) <= 1e-6);
}

#[test]
fn concat_gradient_is_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let a = Tensor::<f64>::randn(Shape::new(2, 1, 3, 3), 1.0, &mut rng);
    let b = Tensor::<f64>::randn(Shape::new(2, 2, 3, 3), 1.0, &mut rng);
    let probe = Tensor::<f64>::randn(Shape::new(2, 3, 3, 3), 1.0, &mut rng);
    let (ga, gb) = ops::split_channels(&probe, 1).unwrap();
    assert!(rel(&ga, &numeric(&a, &probe, |a| ops::concat_channels(a, &b).unwrap())) <= 1e-6);
    assert!(rel(&gb, &numeric(&b, &probe, |b| ops::concat_channels(&a, b).unwrap())) <= 1e-6);
}

#[test]
fn sequential_mode_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let x = Tensor::<f32>::randn(Shape::new(4, 3, 8, 8), 1.0, &mut rng);
    let k = Tensor::<f32>::randn(Shape::new(5, 3, 3, 3), 0.3, &mut rng);
    let a = ops::conv2d(&x, &k, None, Padding::Same, 1).unwrap();
    rrcnn_core::par::set_deterministic(true);
    let b = ops::conv2d(&x, &k, None, Padding::Same, 1).unwrap();
    let c = ops::conv2d(&x, &k, None, Padding::Same, 1).unwrap();
    rrcnn_core::par::set_deterministic(false);
    assert_eq!(a, b);
    assert_eq!(b, c);
}

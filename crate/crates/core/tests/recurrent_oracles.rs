use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrcnn_core::nn::{Init, Layer, Mode, ParamBlock, Projection, ResidualBlock, SoftmaxHead};
use rrcnn_core::recurrent::{convlstm_step, ConvLstmCell, LstmState, Rcl, RclConfig, RclstmBlock, RclstmConfig};
use rrcnn_core::{Shape, Tensor};

fn scalar(v: f64) -> Tensor<f64> {
    Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![v]).unwrap()
}

fn zero_all<L: Layer<f64>>(layer: &mut L) {
    layer.visit_mut(&mut |b: &mut ParamBlock<f64>| {
        b.weight.fill(0.0);
        b.bias.iter_mut().for_each(|v| *v = 0.0);
    });
}

/// Plain scalar peephole LSTM, written independently of the tensor code.
struct ScalarLstm {
    wx: [f64; 4],
    wh: [f64; 4],
    b: [f64; 4],
    peep: [f64; 3],
}

impl ScalarLstm {
    fn step(&self, x: f64, h: f64, c: f64) -> (f64, f64) {
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sig(self.wx[0] * x + self.wh[0] * h + self.peep[0] * c + self.b[0]);
        let f = sig(self.wx[1] * x + self.wh[1] * h + self.peep[1] * c + self.b[1]);
        let c_new = f * c + i * (self.wx[2] * x + self.wh[2] * h + self.b[2]).tanh();
        let o = sig(self.wx[3] * x + self.wh[3] * h + self.peep[2] * c_new + self.b[3]);
        (o * c_new.tanh(), c_new)
    }
}

#[test]
fn convlstm_step_matches_scalar_lstm_over_a_thousand_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut u = |s: f64| rng.random_range(-s..s);
    let oracle = ScalarLstm {
        wx: [u(1.5), u(1.5), u(1.5), u(1.5)],
        wh: [u(1.5), u(1.5), u(1.5), u(1.5)],
        b: [u(0.5), u(0.5), u(0.5), u(0.5)],
        peep: [u(1.0), u(1.0), u(1.0)],
    };
    let mut cell = ConvLstmCell::<f64>::new(&mut Init::new(0), "cell", 1, 1, 1, true);
    {
        let wx = cell.input_conv_mut().block_mut();
        wx.weight.data_mut().copy_from_slice(&oracle.wx);
        wx.bias.copy_from_slice(&oracle.b);
    }
    cell.state_conv_mut().block_mut().weight.data_mut().copy_from_slice(&oracle.wh);
    cell.peephole_mut().unwrap().weight.data_mut().copy_from_slice(&oracle.peep);

    let mut state = LstmState::zeros(Shape::new(1, 1, 1, 1));
    let (mut h, mut c) = (0.0, 0.0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = u(2.0);
        state = convlstm_step(&mut cell, &scalar(x), &state).unwrap();
        (h, c) = oracle.step(x, h, c);
        worst = worst.max((state.h.data()[0] - h).abs()).max((state.c.data()[0] - c).abs());
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
}

#[test]
fn zero_convlstm_gives_half_open_gates_and_zero_state() {
    let mut cell = ConvLstmCell::<f64>::new(&mut Init::new(1), "cell", 2, 3, 3, true);
    let wx = cell.input_conv_mut().block_mut();
    wx.weight.fill(0.0);
    wx.bias.iter_mut().for_each(|v| *v = 0.0);
    cell.state_conv_mut().block_mut().weight.fill(0.0);
    let st = convlstm_step(&mut cell, &Tensor::zeros(Shape::new(1, 2, 4, 4)), &LstmState::zeros(Shape::new(1, 3, 4, 4))).unwrap();
    assert!(st.c.data().iter().all(|&v| v == 0.0));
    assert!(st.h.data().iter().all(|&v| v == 0.0));
}

#[test]
fn rcl_hand_unrolled_scalar_recurrence() {
    let mut init = Init::new(2);
    let mut states = Vec::new();
    for t in 0..3 {
        let rcl = Rcl::<f64>::with_kernel(&mut init, "rcl", RclConfig { in_c: 1, out_c: 1, t_steps: t }, 1);
        if t == 0 {
            assert!(rcl.is_err());
            states.push(2.0);
            continue;
        }
        let mut rcl = rcl.unwrap();
        let ff = rcl.feedforward_mut().block_mut();
        ff.weight.data_mut()[0] = 1.0;
        ff.bias[0] = 0.0;
        rcl.recurrent_mut().block_mut().weight.data_mut()[0] = 0.5;
        states.push(rcl.forward(&scalar(2.0), Mode::Infer).unwrap().data()[0]);
    }
    assert_eq!(states, vec![2.0, 3.0, 3.5]);
}

#[test]
fn zero_residual_block_is_relu() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Tensor::<f64>::randn(Shape::new(2, 3, 5, 5), 1.0, &mut rng);
    let mut rb = ResidualBlock::<f64>::new(&mut Init::new(3), "rb", 3, 3, Projection::POINTWISE);
    zero_all(&mut rb);
    let y = rb.forward(&x, Mode::Infer).unwrap();
    assert_eq!(y, x.map(|v| v.max(0.0)));
}

#[test]
fn zero_rclstm_block_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor::<f64>::randn(Shape::new(1, 4, 4, 4), 1.0, &mut rng);
    let mut block = RclstmBlock::<f64>::new(&mut Init::new(4), "b", RclstmConfig::new(4, 4)).unwrap();
    zero_all(&mut block);
    assert_eq!(block.forward(&x, Mode::Infer).unwrap(), x);
}

#[test]
fn softmax_is_shift_invariant_and_normalised() {
    let mut head = SoftmaxHead::<f64>::new(&mut Init::new(5), "head", 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::<f64>::randn(Shape::new(1, 3, 4, 4), 1.0, &mut rng);
    let p = head.forward(&x, Mode::Infer).unwrap();
    head.visit_mut(&mut |b: &mut ParamBlock<f64>| b.bias.iter_mut().for_each(|v| *v += 7.0));
    let q = head.forward(&x, Mode::Infer).unwrap();
    for (a, b) in p.data().iter().zip(q.data()) {
        assert!((a - b).abs() <= 1e-7);
    }
    for i in 0..16 {
        assert!((p.data()[i] + p.data()[16 + i] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn backward_without_forward_is_an_error() {
    let mut rb = ResidualBlock::<f64>::new(&mut Init::new(6), "rb", 2, 2, Projection::POINTWISE);
    let err = rb.backward(&Tensor::zeros(Shape::new(1, 2, 2, 2))).unwrap_err();
    assert!(matches!(err, rrcnn_core::Error::NoForwardCache(_)));
}

use crate::nn::{Layer, ParamBlock};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            batch_size: 32,
        }
    }
}

/// Bias-corrected Adam:
/// `m = b1 m + (1 - b1) g`, `v = b2 v + (1 - b2) g^2`,
/// `theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)`.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: OptimConfig,
    step: u64,
}

impl Adam {
    pub fn new(cfg: OptimConfig) -> Self {
        Adam { cfg, step: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    /// Apply one update to every parameter block reachable from `model`.
    pub fn step<T: Real, L: Layer<T> + ?Sized>(&mut self, model: &mut L) {
        self.step += 1;
        let t = self.step as i32;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2, lr, eps) = (c.beta1, c.beta2, c.learning_rate, c.epsilon);
        model.visit_mut(&mut |block: &mut ParamBlock<T>| {
            let v = block.optimiser_view();
            let params = v.weight.iter_mut().chain(v.bias.iter_mut());
            let grads = v.grad_weight.iter().chain(v.grad_bias.iter());
            for (((p, &g), m), s) in params.zip(grads).zip(v.m.iter_mut()).zip(v.v.iter_mut()) {
                let g = g.as_f64();
                let mn = b1 * m.as_f64() + (1.0 - b1) * g;
                let sn = b2 * s.as_f64() + (1.0 - b2) * g * g;
                *m = T::from_f64(mn);
                *s = T::from_f64(sn);
                let update = lr * (mn / bc1) / ((sn / bc2).sqrt() + eps);
                *p = T::from_f64(p.as_f64() - update);
            }
        });
    }
}

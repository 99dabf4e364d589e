use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;
use crate::tensor::{Shape, Tensor};

use super::ParamBlock;

/// Seeded parameter factory. Values are drawn in 64-bit and cast, so `f32`
/// and `f64` networks built from the same seed agree up to rounding.
pub struct Init {
    rng: ChaCha8Rng,
    next_id: u32,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
        }
    }

    fn id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Glorot-uniform kernel of `shape` with the given fans, plus `bias_len`
    /// biases filled with `bias_value`.
    pub fn glorot<T: Real>(
        &mut self,
        name: &str,
        shape: Shape,
        fan_in: usize,
        fan_out: usize,
        bias_len: usize,
        bias_value: f64,
    ) -> ParamBlock<T> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..shape.len())
            .map(|_| T::from_f64(self.rng.random_range(-limit..limit)))
            .collect();
        let weight = Tensor::from_vec(shape, data).expect("shape and data agree");
        let id = self.id();
        ParamBlock::new(id, name, weight, vec![T::from_f64(bias_value); bias_len])
    }

    /// Zero-initialised block without bias.
    pub fn zeros<T: Real>(&mut self, name: &str, shape: Shape) -> ParamBlock<T> {
        let id = self.id();
        ParamBlock::new(id, name, Tensor::zeros(shape), Vec::new())
    }

    /// Blocks created so far.
    pub fn count(&self) -> u32 {
        self.next_id
    }
}

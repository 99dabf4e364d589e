use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Argmax positions recorded by [`maxpool2`], one per pooled element, as
/// offsets `0..4` inside the 2x2 window (`2 * dr + dc`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndexMap {
    input: Shape,
    slots: Vec<u8>,
}

impl PoolIndexMap {
    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.input.with_hw(self.input.h / 2, self.input.w / 2)
    }

    /// Source `(row, col)` for the pooled element at `(n, c, i, j)`.
    pub fn source(&self, n: usize, c: usize, i: usize, j: usize) -> (usize, usize) {
        let o = self.output_shape();
        let s = self.slots[((n * o.c + c) * o.h + i) * o.w + j] as usize;
        (2 * i + s / 2, 2 * j + s % 2)
    }
}

/// 2x2 max pooling with stride 2. Ties go to the first element in
/// row-major order within the window.
pub fn maxpool2<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolIndexMap)> {
    let s = x.shape();
    if s.h % 2 != 0 {
        return Err(Error::dim("maxpool2", "row", s.h + 1, s.h));
    }
    if s.w % 2 != 0 {
        return Err(Error::dim("maxpool2", "col", s.w + 1, s.w));
    }
    let (oh, ow) = (s.h / 2, s.w / 2);
    let os = s.with_hw(oh, ow);
    let mut out = Vec::with_capacity(os.len());
    let mut slots = Vec::with_capacity(os.len());
    let src = x.data();
    for plane in 0..s.n * s.c {
        let base = plane * s.h * s.w;
        for i in 0..oh {
            let r0 = base + 2 * i * s.w;
            let r1 = r0 + s.w;
            for j in 0..ow {
                let cand = [src[r0 + 2 * j], src[r0 + 2 * j + 1], src[r1 + 2 * j], src[r1 + 2 * j + 1]];
                let mut best = 0;
                for k in 1..4 {
                    if cand[k] > cand[best] {
                        best = k;
                    }
                }
                out.push(cand[best]);
                slots.push(best as u8);
            }
        }
    }
    Ok((Tensor::from_vec(os, out)?, PoolIndexMap { input: s, slots }))
}

pub fn maxpool2_backward<T: Real>(grad: &Tensor<T>, map: &PoolIndexMap) -> Result<Tensor<T>> {
    let os = map.output_shape();
    Tensor::zeros(os).expect_same_shape(grad, "maxpool2_backward")?;
    let s = map.input;
    let mut gx = Tensor::zeros(s);
    let dst = gx.data_mut();
    let g = grad.data();
    let (oh, ow) = (os.h, os.w);
    for plane in 0..s.n * s.c {
        let base = plane * s.h * s.w;
        for i in 0..oh {
            for j in 0..ow {
                let o = (plane * oh + i) * ow + j;
                let slot = map.slots[o] as usize;
                dst[base + (2 * i + slot / 2) * s.w + 2 * j + slot % 2] = g[o];
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distinct_values_pick_window_max() {
        let v = vec![
            1.0, 2.0, 5.0, 3.0, //
            4.0, 0.0, 6.0, 7.0, //
            9.0, 8.0, 0.0, 1.0, //
            2.0, 3.0, 4.0, 2.5,
        ];
        let x = Tensor::<f32>::from_vec(Shape::new(1, 1, 4, 4), v).unwrap();
        let (y, map) = maxpool2(&x).unwrap();
        assert_eq!(y.data(), &[4.0, 7.0, 9.0, 4.0]);
        assert_eq!(map.source(0, 0, 0, 0), (1, 0));
        assert_eq!(map.source(0, 0, 0, 1), (1, 3));
        assert_eq!(map.source(0, 0, 1, 0), (2, 0));
        assert_eq!(map.source(0, 0, 1, 1), (3, 2));
    }

    #[test]
    fn ties_pick_first_in_row_major_order() {
        let x = Tensor::<f32>::full(Shape::new(1, 2, 4, 6), 3.0);
        let (_, map) = maxpool2(&x).unwrap();
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..3 {
                    assert_eq!(map.source(0, c, i, j), (2 * i, 2 * j));
                }
            }
        }
    }

    #[test]
    fn odd_dims_rejected() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 4, 5));
        assert!(maxpool2(&x).unwrap_err().to_string().contains("col axis"));
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 3, 4));
        assert!(maxpool2(&x).unwrap_err().to_string().contains("row axis"));
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::randn(Shape::new(2, 3, 6, 4), 1.0, &mut rng);
        let g = Tensor::<f64>::randn(Shape::new(2, 3, 3, 2), 1.0, &mut rng);
        let (y, map) = maxpool2(&x).unwrap();
        let gx = maxpool2_backward(&g, &map).unwrap();
        let mut want_gx = Tensor::<f64>::zeros(x.shape());
        for n in 0..2 {
            for c in 0..3 {
                for i in 0..3 {
                    for j in 0..2 {
                        let mut best = (2 * i, 2 * j);
                        for (r, q) in [(2 * i, 2 * j + 1), (2 * i + 1, 2 * j), (2 * i + 1, 2 * j + 1)] {
                            if x.at(n, c, r, q) > x.at(n, c, best.0, best.1) {
                                best = (r, q);
                            }
                        }
                        assert_eq!(y.at(n, c, i, j), x.at(n, c, best.0, best.1));
                        want_gx.set(n, c, best.0, best.1, g.at(n, c, i, j));
                    }
                }
            }
        }
        assert_eq!(gx, want_gx);
    }
}

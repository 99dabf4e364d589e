use crate::error::Result;
use crate::real::Real;
use crate::tensor::Tensor;

/// Source taps for output coordinate `o` when doubling a length-`len` axis
/// with half-pixel centres: `src = (o + 0.5) / 2 - 0.5`, clamped at 0.
fn taps(o: usize, len: usize) -> (usize, usize, f64) {
    let src = ((o as f64 + 0.5) * 0.5 - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, src - i0 as f64)
}

fn table(len: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * len).map(|o| taps(o, len)).collect()
}

/// Bilinear 2x upsampling, align-corners off (half-pixel centres, edge
/// clamped), matching the common deep-learning convention.
pub fn upsample_bilinear2<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let os = s.with_hw(2 * s.h, 2 * s.w);
    let (rows, cols) = (table(s.h), table(s.w));
    let mut out = Tensor::zeros(os);
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..s.n * s.c {
        let sb = plane * s.h * s.w;
        let db = plane * os.h * os.w;
        for (i, &(r0, r1, a)) in rows.iter().enumerate() {
            let a = T::from_f64(a);
            for (j, &(c0, c1, b)) in cols.iter().enumerate() {
                let b = T::from_f64(b);
                let top = src[sb + r0 * s.w + c0] * (T::one() - b) + src[sb + r0 * s.w + c1] * b;
                let bot = src[sb + r1 * s.w + c0] * (T::one() - b) + src[sb + r1 * s.w + c1] * b;
                dst[db + i * os.w + j] = top * (T::one() - a) + bot * a;
            }
        }
    }
    out
}

/// Transpose of the interpolation matrix applied to `grad`.
pub fn upsample_bilinear2_backward<T: Real>(grad: &Tensor<T>) -> Result<Tensor<T>> {
    let os = grad.shape();
    if os.h % 2 != 0 {
        return Err(crate::Error::dim("upsample_bilinear2_backward", "row", os.h + 1, os.h));
    }
    if os.w % 2 != 0 {
        return Err(crate::Error::dim("upsample_bilinear2_backward", "col", os.w + 1, os.w));
    }
    let s = os.with_hw(os.h / 2, os.w / 2);
    let (rows, cols) = (table(s.h), table(s.w));
    let mut gx = Tensor::zeros(s);
    let g = grad.data();
    let dst = gx.data_mut();
    for plane in 0..s.n * s.c {
        let sb = plane * s.h * s.w;
        let gb = plane * os.h * os.w;
        for (i, &(r0, r1, a)) in rows.iter().enumerate() {
            let a = T::from_f64(a);
            for (j, &(c0, c1, b)) in cols.iter().enumerate() {
                let b = T::from_f64(b);
                let v = g[gb + i * os.w + j];
                let top = v * (T::one() - a);
                let bot = v * a;
                dst[sb + r0 * s.w + c0] = dst[sb + r0 * s.w + c0] + top * (T::one() - b);
                dst[sb + r0 * s.w + c1] = dst[sb + r0 * s.w + c1] + top * b;
                dst[sb + r1 * s.w + c0] = dst[sb + r1 * s.w + c0] + bot * (T::one() - b);
                dst[sb + r1 * s.w + c1] = dst[sb + r1 * s.w + c1] + bot * b;
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_stay_constant() {
        let x = Tensor::<f32>::full(Shape::new(2, 3, 3, 5), 1.25);
        let y = upsample_bilinear2(&x);
        assert_eq!(y.shape(), Shape::new(2, 3, 6, 10));
        assert!(y.data().iter().all(|&v| v == 1.25));
        let one = Tensor::<f32>::full(Shape::new(1, 1, 1, 1), -4.0);
        assert_eq!(upsample_bilinear2(&one).data(), &[-4.0; 4]);
    }

    /// Independent oracle: per-pixel formula with explicit clamping.
    fn oracle(x: &Tensor<f64>) -> Tensor<f64> {
        let s = x.shape();
        let mut y = Tensor::zeros(s.with_hw(2 * s.h, 2 * s.w));
        let coord = |o: usize, len: usize| -> (usize, usize, f64) {
            let mut p = (o as f64 + 0.5) / 2.0 - 0.5;
            if p < 0.0 {
                p = 0.0;
            }
            let lo = p.floor() as usize;
            let hi = if lo + 1 < len { lo + 1 } else { lo };
            (lo, hi, p - lo as f64)
        };
        for n in 0..s.n {
            for c in 0..s.c {
                for i in 0..2 * s.h {
                    let (r0, r1, a) = coord(i, s.h);
                    for j in 0..2 * s.w {
                        let (c0, c1, b) = coord(j, s.w);
                        let v = (1.0 - a) * (1.0 - b) * x.at(n, c, r0, c0)
                            + (1.0 - a) * b * x.at(n, c, r0, c1)
                            + a * (1.0 - b) * x.at(n, c, r1, c0)
                            + a * b * x.at(n, c, r1, c1);
                        y.set(n, c, i, j, v);
                    }
                }
            }
        }
        y
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::<f64>::randn(Shape::new(1, 2, 3, 3), 1.0, &mut rng);
        let got = upsample_bilinear2(&x);
        let want = oracle(&x);
        let err = got.zip_map(&want, "t", |a, b| a - b).unwrap().norm() / want.norm();
        assert!(err <= 1e-6);
        // first row of a 1-D ramp: 0, 0.25, 0.75, ... edge clamped
        let ramp = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 3), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(upsample_bilinear2(&ramp).data()[..6], [0.0, 0.25, 0.75, 1.25, 1.75, 2.0]);
    }

    #[test]
    fn backward_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Tensor::<f64>::randn(Shape::new(2, 2, 3, 4), 1.0, &mut rng);
        let y = Tensor::<f64>::randn(Shape::new(2, 2, 6, 8), 1.0, &mut rng);
        let lhs = upsample_bilinear2(&x).dot(&y).unwrap();
        let rhs = x.dot(&upsample_bilinear2_backward(&y).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

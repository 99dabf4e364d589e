use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// `max(x, 0)`. NaN passes through so divergence stays detectable.
pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() || v.is_nan() { v } else { T::zero() })
}

/// Gradient through a ReLU given either its input or its output (`> 0`
/// agrees for both). The subgradient at exactly 0 is taken as 0.
pub fn relu_backward<T: Real>(fwd: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    fwd.zip_map(grad, "relu_backward", |v, g| if v > T::zero() { g } else { T::zero() })
}

fn sigmoid_scalar<T: Real>(v: T) -> T {
    // split on sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Takes the sigmoid *output* `y`.
pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    y.zip_map(grad, "sigmoid_backward", |s, g| g * s * (T::one() - s))
}

pub fn tanh<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

/// Takes the tanh *output* `y`.
pub fn tanh_backward<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    y.zip_map(grad, "tanh_backward", |t, g| g * (T::one() - t * t))
}

/// Elementwise sum. Its backward passes the cotangent to both operands.
pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.zip_map(b, "add", |p, q| p + q)
}

pub fn hadamard<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.zip_map(b, "hadamard", |p, q| p * q)
}

pub fn hadamard_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    a.expect_same_shape(b, "hadamard_backward")?;
    Ok((
        grad.zip_map(b, "hadamard_backward", |g, q| g * q)?,
        grad.zip_map(a, "hadamard_backward", |g, p| g * p)?,
    ))
}

/// Stack `a` then `b` along the channel axis.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    for (axis, x, y) in [("batch", sa.n, sb.n), ("row", sa.h, sb.h), ("col", sa.w, sb.w)] {
        if x != y {
            return Err(Error::dim("concat_channels", axis, x, y));
        }
    }
    let shape = sa.with_c(sa.c + sb.c);
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..sa.n {
        data.extend_from_slice(a.sample(n));
        data.extend_from_slice(b.sample(n));
    }
    Tensor::from_vec(shape, data)
}

/// Backward of [`concat_channels`]: split the first `first_c` channels off.
pub fn split_channels<T: Real>(g: &Tensor<T>, first_c: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = g.shape();
    if first_c == 0 || first_c >= s.c {
        return Err(Error::invalid(
            "split_channels",
            format!("split point {first_c} outside 1..{}", s.c),
        ));
    }
    let cut = first_c * s.plane();
    let mut a = Vec::with_capacity(s.n * cut);
    let mut b = Vec::with_capacity(s.len() - s.n * cut);
    for n in 0..s.n {
        let (x, y) = g.sample(n).split_at(cut);
        a.extend_from_slice(x);
        b.extend_from_slice(y);
    }
    Ok((
        Tensor::from_vec(s.with_c(first_c), a)?,
        Tensor::from_vec(s.with_c(s.c - first_c), b)?,
    ))
}

/// Softmax across the channel axis at every pixel.
pub fn softmax_channels<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let s: Shape = x.shape();
    let plane = s.plane();
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        let src = x.sample(n);
        let dst = out.sample_mut(n);
        for p in 0..plane {
            let m = (0..s.c).map(|c| src[c * plane + p]).fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for c in 0..s.c {
                let e = (src[c * plane + p] - m).exp();
                dst[c * plane + p] = e;
                z = z + e;
            }
            for c in 0..s.c {
                dst[c * plane + p] = dst[c * plane + p] / z;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(Shape::new(1, 1, 1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_values() {
        assert_eq!(relu(&t(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(sigmoid(&t(&[0.0])).data(), &[0.5]);
        assert_eq!(tanh(&t(&[0.0])).data(), &[0.0]);
        let s = sigmoid(&t(&[-1000.0, 1000.0]));
        assert!(s.all_finite());
    }

    #[test]
    fn relu_kink_has_zero_gradient() {
        let g = relu_backward(&t(&[0.0, 1.0, -1.0]), &t(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 5.0, 0.0]);
    }

    fn fd_check(f: impl Fn(&Tensor<f64>) -> Tensor<f64>, analytic: impl Fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(2, 3, 2, 2);
        // keep inputs away from zero so relu stays differentiable
        let x = Tensor::<f64>::randn(shape, 1.0, &mut rng).map(|v| if v.abs() < 0.1 { v + 0.3 } else { v });
        let probe = Tensor::<f64>::randn(shape, 1.0, &mut rng);
        let ga = analytic(&x, &probe);
        let eps = 1e-4;
        let mut num = Tensor::zeros(shape);
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            let lp = f(&xp).dot(&probe).unwrap();
            let lm = f(&xm).dot(&probe).unwrap();
            num.data_mut()[i] = (lp - lm) / (2.0 * eps);
        }
        let err = ga.zip_map(&num, "t", |a, b| a - b).unwrap().norm() / num.norm();
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn unary_backward_matches_finite_differences() {
        fd_check(relu, |x, g| relu_backward(x, g).unwrap());
        fd_check(sigmoid, |x, g| sigmoid_backward(&sigmoid(x), g).unwrap());
        fd_check(tanh, |x, g| tanh_backward(&tanh(x), g).unwrap());
    }

    #[test]
    fn hadamard_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = Tensor::<f64>::randn(Shape::new(2, 3, 2, 2), 1.0, &mut rng);
        let bb = b.clone();
        fd_check(move |a| hadamard(a, &bb).unwrap(), |a, g| hadamard_backward(a, &b, g).unwrap().0);
    }

    #[test]
    fn concat_split_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Tensor::<f32>::randn(Shape::new(2, 3, 4, 4), 1.0, &mut rng);
        let b = Tensor::<f32>::randn(Shape::new(2, 5, 4, 4), 1.0, &mut rng);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), Shape::new(2, 8, 4, 4));
        assert_eq!(c.at(1, 3, 2, 1), b.at(1, 0, 2, 1));
        let (x, y) = split_channels(&c, 3).unwrap();
        assert_eq!((x, y), (a, b));
    }

    #[test]
    fn binary_shape_mismatch() {
        let a = Tensor::<f32>::zeros(Shape::new(1, 2, 3, 3));
        let b = Tensor::<f32>::zeros(Shape::new(1, 2, 3, 4));
        assert!(add(&a, &b).unwrap_err().to_string().contains("col axis"));
        assert!(hadamard(&a, &b).is_err());
        assert!(concat_channels(&a, &b).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f64>::randn(Shape::new(2, 3, 2, 2), 10.0, &mut rng);
        let p = softmax_channels(&x);
        for n in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let s: f64 = (0..3).map(|c| p.at(n, c, i, j)).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

use crate::error::{Error, Result};
use crate::par;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Zero padding mode. `Same` pads `(k - 1) / 2` on each side and needs an
/// odd kernel; with stride 1 it preserves the spatial size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.ph == 0 && self.pw == 0
    }
}

pub fn conv_output_len(len: usize, k: usize, pad: usize, stride: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

fn geometry(
    op: &'static str,
    x: Shape,
    k: Shape,
    padding: Padding,
    stride: usize,
) -> Result<Geometry> {
    if stride == 0 || stride > 2 {
        return Err(Error::invalid(op, format!("stride {stride} not in {{1, 2}}")));
    }
    if k.c != x.c {
        return Err(Error::dim(op, "channel", k.c, x.c));
    }
    let (ph, pw) = match padding {
        Padding::Same => {
            if k.h % 2 == 0 {
                return Err(Error::invalid(op, format!("same padding needs odd kernel rows, got {}", k.h)));
            }
            if k.w % 2 == 0 {
                return Err(Error::invalid(op, format!("same padding needs odd kernel cols, got {}", k.w)));
            }
            (k.h / 2, k.w / 2)
        }
        Padding::Valid => (0, 0),
    };
    if x.h + 2 * ph < k.h {
        return Err(Error::dim(op, "row", k.h, x.h + 2 * ph));
    }
    if x.w + 2 * pw < k.w {
        return Err(Error::dim(op, "col", k.w, x.w + 2 * pw));
    }
    Ok(Geometry {
        c: x.c,
        h: x.h,
        w: x.w,
        kh: k.h,
        kw: k.w,
        stride,
        ph,
        pw,
        oh: conv_output_len(x.h, k.h, ph, stride),
        ow: conv_output_len(x.w, k.w, pw, stride),
    })
}

/// Output columns `[lo, hi)` whose input column `ow * stride + kj - pw`
/// falls inside `0..w`.
#[inline]
fn valid_cols(g: &Geometry, kj: usize) -> (usize, usize) {
    let s = g.stride;
    let lo = g.pw.saturating_sub(kj).div_ceil(s);
    let hi = if g.w + g.pw > kj { (g.w + g.pw - kj).div_ceil(s) } else { 0 };
    (lo.min(g.ow), hi.min(g.ow).max(lo.min(g.ow)))
}

fn im2col<T: Real>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                let (lo, hi) = valid_cols(g, kj);
                for oh in 0..g.oh {
                    let seg = &mut dst[oh * g.ow..(oh + 1) * g.ow];
                    let ih = (oh * g.stride + ki) as isize - g.ph as isize;
                    if ih < 0 || ih >= g.h as isize {
                        seg.fill(T::zero());
                        continue;
                    }
                    let src = &x[(c * g.h + ih as usize) * g.w..][..g.w];
                    seg[..lo].fill(T::zero());
                    seg[hi..].fill(T::zero());
                    let first = lo * g.stride + kj - g.pw;
                    if g.stride == 1 {
                        seg[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                    } else {
                        for (d, &v) in seg[lo..hi].iter_mut().zip(src[first..].iter().step_by(g.stride)) {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], g: &Geometry, x: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                let (lo, hi) = valid_cols(g, kj);
                if lo >= hi {
                    continue;
                }
                let first = lo * g.stride + kj - g.pw;
                for oh in 0..g.oh {
                    let ih = (oh * g.stride + ki) as isize - g.ph as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let dst = &mut x[(c * g.h + ih as usize) * g.w..][..g.w];
                    let seg = &src[oh * g.ow + lo..oh * g.ow + hi];
                    if g.stride == 1 {
                        for (d, &v) in dst[first..first + seg.len()].iter_mut().zip(seg) {
                            *d = *d + v;
                        }
                    } else {
                        for (d, &v) in dst[first..].iter_mut().step_by(g.stride).zip(seg) {
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
}

/// Row-major `src` (`rows x cols`) into `dst` (`cols x rows`).
pub(crate) fn transpose_into<T: Copy>(src: &[T], rows: usize, cols: usize, dst: &mut [T]) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn check_bias<T>(op: &'static str, bias: Option<&[T]>, out_c: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != out_c => Err(Error::dim(op, "bias", out_c, b.len())),
        _ => Ok(()),
    }
}

fn add_bias<T: Real>(out: &mut [T], bias: Option<&[T]>, plane: usize) {
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_mut(plane).zip(b) {
            row.iter_mut().for_each(|v| *v = *v + bv);
        }
    }
}

/// 2-D cross-correlation. `k` has shape `(out_c, in_c, kh, kw)`.
pub fn conv2d<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    bias: Option<&[T]>,
    padding: Padding,
    stride: usize,
) -> Result<Tensor<T>> {
    let ks = k.shape();
    let g = geometry("conv2d", x.shape(), ks, padding, stride)?;
    check_bias("conv2d", bias, ks.n)?;
    let out_shape = Shape::new(x.shape().n, ks.n, g.oh, g.ow);
    let mut out = Tensor::zeros(out_shape);
    let plane = g.out_plane();
    let kd = k.data();
    par::for_each_chunk_mut(out.data_mut(), out_shape.sample(), |n, o| {
        let xs = x.sample(n);
        if g.is_pointwise() {
            T::gemm(ks.n, g.c, plane, T::one(), kd, false, xs, false, T::zero(), o);
        } else {
            let mut cols = vec![T::zero(); g.rows() * plane];
            im2col(xs, &g, &mut cols);
            T::gemm(ks.n, g.rows(), plane, T::one(), kd, false, &cols, false, T::zero(), o);
        }
        add_bias(o, bias, plane);
    });
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T: Real> {
    pub x: Tensor<T>,
    pub k: Tensor<T>,
    pub b: Vec<T>,
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    grad_out: &Tensor<T>,
    padding: Padding,
    stride: usize,
) -> Result<ConvGrads<T>> {
    let mut gk = Tensor::zeros(k.shape());
    let mut gb = vec![T::zero(); k.shape().n];
    let gx = conv2d_backward_into(x, k, grad_out, padding, stride, gk.data_mut(), Some(&mut gb), true)?
        .expect("input gradient requested");
    Ok(ConvGrads { x: gx, k: gk, b: gb })
}

/// Accumulating form of [`conv2d_backward`]: adds into `gk` / `gb` and only
/// materialises the input gradient when `need_gx` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_into<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    grad_out: &Tensor<T>,
    padding: Padding,
    stride: usize,
    gk: &mut [T],
    gb: Option<&mut [T]>,
    need_gx: bool,
) -> Result<Option<Tensor<T>>> {
    let ks = k.shape();
    let xs = x.shape();
    let g = geometry("conv2d_backward", xs, ks, padding, stride)?;
    let gs = grad_out.shape();
    for (axis, want, got) in [
        ("batch", xs.n, gs.n),
        ("channel", ks.n, gs.c),
        ("row", g.oh, gs.h),
        ("col", g.ow, gs.w),
    ] {
        if want != got {
            return Err(Error::dim("conv2d_backward", axis, want, got));
        }
    }
    if gk.len() != ks.len() {
        return Err(Error::dim("conv2d_backward", "kernel", ks.len(), gk.len()));
    }
    let plane = g.out_plane();
    let rows = g.rows();

    if let Some(gb) = gb {
        check_bias("conv2d_backward", Some(&*gb), ks.n)?;
        for n in 0..xs.n {
            for (o, row) in grad_out.sample(n).chunks(plane).enumerate() {
                gb[o] = gb[o] + row.iter().copied().sum::<T>();
            }
        }
    }

    // Kernel gradient `g * cols^T`, summed in a fixed sample order. The
    // GEMM runs much faster with cols^T materialised row-major.
    let mut cols = vec![T::zero(); rows * plane];
    let mut cols_t = vec![T::zero(); rows * plane];
    for n in 0..xs.n {
        let src = if g.is_pointwise() {
            x.sample(n)
        } else {
            im2col(x.sample(n), &g, &mut cols);
            &cols
        };
        transpose_into(src, rows, plane, &mut cols_t);
        T::gemm(ks.n, plane, rows, T::one(), grad_out.sample(n), false, &cols_t, false, T::one(), gk);
    }
    drop((cols, cols_t));

    if !need_gx {
        return Ok(None);
    }
    let mut gx = Tensor::zeros(xs);
    let kd = k.data();
    par::for_each_chunk_mut(gx.data_mut(), xs.sample(), |n, dst| {
        let gn = grad_out.sample(n);
        if g.is_pointwise() {
            T::gemm(rows, ks.n, plane, T::one(), kd, true, gn, false, T::zero(), dst);
        } else {
            let mut dcols = vec![T::zero(); rows * plane];
            T::gemm(rows, ks.n, plane, T::one(), kd, true, gn, false, T::zero(), &mut dcols);
            col2im(&dcols, &g, dst);
        }
    });
    Ok(Some(gx))
}

fn transpose_geometry(op: &'static str, x: Shape, k: Shape, stride: usize) -> Result<Geometry> {
    if stride != 2 {
        return Err(Error::invalid(op, format!("stride must be 2, got {stride}")));
    }
    if k.n != x.c {
        return Err(Error::dim(op, "channel", k.n, x.c));
    }
    if k.h % 2 == 0 || k.w % 2 == 0 {
        return Err(Error::invalid(op, "kernel must be odd"));
    }
    // The adjoint stride-2 convolution maps (2h, 2w) -> (h, w) with pad k/2;
    // output padding 1 is implied so the doubling is exact.
    Ok(Geometry {
        c: k.c,
        h: 2 * x.h,
        w: 2 * x.w,
        kh: k.h,
        kw: k.w,
        stride: 2,
        ph: k.h / 2,
        pw: k.w / 2,
        oh: x.h,
        ow: x.w,
    })
}

/// Stride-2 transposed convolution with exact spatial doubling.
///
/// `k` has shape `(in_c, out_c, kh, kw)` with odd `kh, kw`. The result is the
/// adjoint of `conv2d(., k, None, Same, 2)` applied to an input of twice the
/// size, plus bias. Equivalently: padding `k / 2` and output padding 1.
pub fn conv_transpose2d<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    bias: Option<&[T]>,
    stride: usize,
) -> Result<Tensor<T>> {
    let xs = x.shape();
    let ks = k.shape();
    let g = transpose_geometry("conv_transpose2d", xs, ks, stride)?;
    check_bias("conv_transpose2d", bias, ks.c)?;
    let out_shape = Shape::new(xs.n, ks.c, g.h, g.w);
    let mut out = Tensor::zeros(out_shape);
    let kd = k.data();
    let plane = g.out_plane();
    par::for_each_chunk_mut(out.data_mut(), out_shape.sample(), |n, o| {
        let mut cols = vec![T::zero(); g.rows() * plane];
        T::gemm(g.rows(), xs.c, plane, T::one(), kd, true, x.sample(n), false, T::zero(), &mut cols);
        col2im(&cols, &g, o);
        add_bias(o, bias, g.h * g.w);
    });
    Ok(out)
}

pub fn conv_transpose2d_backward<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
) -> Result<ConvGrads<T>> {
    let mut gk = Tensor::zeros(k.shape());
    let mut gb = vec![T::zero(); k.shape().c];
    let gx = conv_transpose2d_backward_into(x, k, grad_out, stride, gk.data_mut(), Some(&mut gb), true)?
        .expect("input gradient requested");
    Ok(ConvGrads { x: gx, k: gk, b: gb })
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_backward_into<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    gk: &mut [T],
    gb: Option<&mut [T]>,
    need_gx: bool,
) -> Result<Option<Tensor<T>>> {
    let xs = x.shape();
    let ks = k.shape();
    let g = transpose_geometry("conv_transpose2d_backward", xs, ks, stride)?;
    let gs = grad_out.shape();
    for (axis, want, got) in [
        ("batch", xs.n, gs.n),
        ("channel", ks.c, gs.c),
        ("row", g.h, gs.h),
        ("col", g.w, gs.w),
    ] {
        if want != got {
            return Err(Error::dim("conv_transpose2d_backward", axis, want, got));
        }
    }
    if gk.len() != ks.len() {
        return Err(Error::dim("conv_transpose2d_backward", "kernel", ks.len(), gk.len()));
    }
    let plane = g.out_plane();
    let rows = g.rows();
    if let Some(gb) = gb {
        check_bias("conv_transpose2d_backward", Some(&*gb), ks.c)?;
        for n in 0..xs.n {
            for (o, row) in grad_out.sample(n).chunks(g.h * g.w).enumerate() {
                gb[o] = gb[o] + row.iter().copied().sum::<T>();
            }
        }
    }
    let mut cols = vec![T::zero(); rows * plane];
    for n in 0..xs.n {
        im2col(grad_out.sample(n), &g, &mut cols);
        T::gemm(xs.c, plane, rows, T::one(), x.sample(n), false, &cols, true, T::one(), gk);
    }
    drop(cols);
    if !need_gx {
        return Ok(None);
    }
    let mut gx = Tensor::zeros(xs);
    let kd = k.data();
    par::for_each_chunk_mut(gx.data_mut(), xs.sample(), |n, dst| {
        let mut cols = vec![T::zero(); rows * plane];
        im2col(grad_out.sample(n), &g, &mut cols);
        T::gemm(xs.c, rows, plane, T::one(), kd, false, &cols, false, T::zero(), dst);
    });
    Ok(Some(gx))
}

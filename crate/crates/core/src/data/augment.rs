use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of dihedral transforms of a square.
pub const AUGMENTATIONS: u8 = 8;

/// Source pixel of output `(i, j)` under transform `aug`: a horizontal
/// flip when `aug >= 4`, followed by `aug % 4` counter-clockwise quarter
/// turns.
fn source(aug: u8, n: usize, mut i: usize, mut j: usize) -> (usize, usize) {
    for _ in 0..aug % 4 {
        (i, j) = (j, n - 1 - i);
    }
    if aug >= 4 {
        j = n - 1 - j;
    }
    (i, j)
}

/// Transform one sample (`c` planes of `h x w`) and its label plane.
pub fn augment_in_place(data: &mut [f32], labels: &mut [u8], c: usize, h: usize, w: usize, aug: u8) -> Result<()> {
    if aug >= AUGMENTATIONS {
        return Err(Error::invalid("augment", format!("augmentation id {aug} outside 0..8")));
    }
    if aug == 0 {
        return Ok(());
    }
    if h != w {
        return Err(Error::invalid("augment", format!("patch {h}x{w} is not square")));
    }
    let n = h;
    let map: Vec<usize> = (0..n * n)
        .map(|q| {
            let (si, sj) = source(aug, n, q / n, q % n);
            si * n + sj
        })
        .collect();
    let mut buf = vec![0f32; n * n];
    for plane in data.chunks_mut(n * n).take(c) {
        for (q, &s) in map.iter().enumerate() {
            buf[q] = plane[s];
        }
        plane.copy_from_slice(&buf);
    }
    let src = labels.to_vec();
    for (q, &s) in map.iter().enumerate() {
        labels[q] = src[s];
    }
    Ok(())
}

/// Transformed copy of every sample of a batch and its labels.
pub fn augment(x: &Tensor<f32>, labels: &[u8], aug: u8) -> Result<(Tensor<f32>, Vec<u8>)> {
    let s = x.shape();
    if labels.len() != s.n * s.plane() {
        return Err(Error::dim("augment", "label", s.n * s.plane(), labels.len()));
    }
    let mut out = x.clone();
    let mut lab = labels.to_vec();
    for n in 0..s.n {
        augment_in_place(
            out.sample_mut(n),
            &mut lab[n * s.plane()..(n + 1) * s.plane()],
            s.c,
            s.h,
            s.w,
            aug,
        )?;
    }
    Ok((out, lab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn quarter_turn_moves_top_right_to_top_left() {
        // 2x2 [[a, b], [c, d]] turned counter-clockwise is [[b, d], [a, c]].
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, l) = augment(&x, &[1, 2, 3, 4], 1).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 1.0, 3.0]);
        assert_eq!(l, vec![2, 4, 1, 3]);
        let (f, _) = augment(&x, &[0; 4], 4).unwrap();
        assert_eq!(f.data(), &[2.0, 1.0, 4.0, 3.0]);
    }
}

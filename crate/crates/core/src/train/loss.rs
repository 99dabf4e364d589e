use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Weighted categorical cross-entropy settings.
#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    /// One weight per class, indexed by label.
    pub class_weights: Vec<f64>,
    /// Label excluded from loss and gradient.
    pub ignore_label: u8,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            class_weights: vec![0.2, 0.8],
            ignore_label: 2,
        }
    }
}

/// Probabilities below this are clamped before the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Loss `-(1/M) sum_m w_{y_m} log p_m[y_m]` over the `M` non-ignored pixels,
/// and its gradient with respect to the pre-softmax logits,
/// `w_y (p - onehot(y)) / M` (zero at ignored pixels).
///
/// `labels` holds one code per pixel in `(n, h, w)` order.
pub fn wcce_loss<T: Real>(probs: &Tensor<T>, labels: &[u8], cfg: &LossConfig) -> Result<(f64, Tensor<T>)> {
    let s = probs.shape();
    if labels.len() != s.n * s.plane() {
        return Err(Error::dim("wcce_loss", "label", s.n * s.plane(), labels.len()));
    }
    if cfg.class_weights.len() != s.c {
        return Err(Error::dim("wcce_loss", "channel", cfg.class_weights.len(), s.c));
    }
    let plane = s.plane();
    let mut kept = 0usize;
    for &y in labels {
        if y == cfg.ignore_label {
            continue;
        }
        if y as usize >= s.c {
            return Err(Error::invalid("wcce_loss", format!("label {y} outside 0..{}", s.c)));
        }
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::EmptyLossSupport);
    }
    let m = kept as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(s);
    for n in 0..s.n {
        let p = probs.sample(n);
        let g = grad.sample_mut(n);
        for q in 0..plane {
            let y = labels[n * plane + q];
            if y == cfg.ignore_label {
                continue;
            }
            let w = cfg.class_weights[y as usize];
            let py = p[y as usize * plane + q].as_f64();
            // f64::max would swallow a NaN, so keep it visible to the caller
            let clamped = if py.is_nan() { py } else { py.max(LOG_FLOOR) };
            loss -= w * clamped.ln();
            for c in 0..s.c {
                let onehot = if c == y as usize { 1.0 } else { 0.0 };
                g[c * plane + q] = T::from_f64(w * (p[c * plane + q].as_f64() - onehot) / m);
            }
        }
    }
    Ok((loss / m, grad))
}

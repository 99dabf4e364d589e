use crate::data::augment_in_place;
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Patches held in memory plus a list of `(patch, augmentation)` items.
/// Augmentations are applied when a batch is assembled.
#[derive(Clone, Debug)]
pub struct Dataset {
    images: Tensor<f32>,
    labels: Vec<u8>,
    items: Vec<(usize, u8)>,
}

/// A batch of images `(n, c, p, p)` and labels `(n, p, p)`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Tensor<f32>, labels: Vec<u8>, items: Vec<(usize, u8)>) -> Result<Self> {
        let s = images.shape();
        if labels.len() != s.n * s.plane() {
            return Err(Error::dim("dataset", "label", s.n * s.plane(), labels.len()));
        }
        if let Some(&(p, a)) = items.iter().find(|&&(p, a)| p >= s.n || a >= 8) {
            return Err(Error::invalid("dataset", format!("item ({p}, {a}) out of range")));
        }
        Ok(Dataset { images, labels, items })
    }

    /// Every patch once, unaugmented.
    pub fn plain(images: Tensor<f32>, labels: Vec<u8>) -> Result<Self> {
        let n = images.shape().n;
        Self::new(images, labels, (0..n).map(|i| (i, 0)).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn patch_shape(&self) -> Shape {
        self.images.shape()
    }

    pub fn items(&self) -> &[(usize, u8)] {
        &self.items
    }

    /// Assemble the batch of the given item indices.
    pub fn batch(&self, which: &[usize]) -> Result<Batch> {
        let s = self.images.shape();
        let mut data = Vec::with_capacity(which.len() * s.sample());
        let mut labels = Vec::with_capacity(which.len() * s.plane());
        for &k in which {
            let (p, aug) = *self
                .items
                .get(k)
                .ok_or_else(|| Error::invalid("dataset", format!("item {k} out of range")))?;
            let start = data.len();
            data.extend_from_slice(self.images.sample(p));
            let lstart = labels.len();
            labels.extend_from_slice(&self.labels[p * s.plane()..(p + 1) * s.plane()]);
            augment_in_place(&mut data[start..], &mut labels[lstart..], s.c, s.h, s.w, aug)?;
        }
        Ok(Batch {
            images: Tensor::from_vec(Shape::new(which.len(), s.c, s.h, s.w), data)?,
            labels,
        })
    }
}

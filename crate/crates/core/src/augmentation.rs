//! Split-and-mirror augmentation.
//!
//! Images are `x x y x C` with `x` the first ("length") axis. A split cuts
//! across the first axis at its midpoint; `mirror` reflects the first axis
//! and `reflect_horizontal` the second. For odd `x` the first half gets the
//! extra row.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair<T> {
    /// Rows `0..m`, `m = ceil(x / 2)`.
    pub left: Tensor<T>,
    /// Rows `m..x`.
    pub right: Tensor<T>,
}

pub fn split_vertical<T: Real>(image: &Tensor<T>) -> Result<SplitPair<T>> {
    let (x, y, c) = image.dims3("split_vertical")?;
    if x < 2 {
        return Err(Error::shape(
            "split_vertical",
            format!("image needs at least 2 rows to split, got {x}"),
        ));
    }
    let m = x.div_ceil(2);
    let cut = m * y * c;
    let data = image.data();
    Ok(SplitPair {
        left: Tensor::new(vec![m, y, c], data[..cut].to_vec())?,
        right: Tensor::new(vec![x - m, y, c], data[cut..].to_vec())?,
    })
}

/// `out(i, j) = in(x - 1 - i, j)`.
pub fn mirror<T: Real>(image: &Tensor<T>) -> Result<Tensor<T>> {
    let (x, y, c) = image.dims3("mirror")?;
    let row = y * c;
    let data = image
        .data()
        .chunks_exact(row)
        .rev()
        .flatten()
        .copied()
        .collect::<Vec<_>>();
    Tensor::new(vec![x, y, c], data)
}

/// `out(i, j) = in(i, y - 1 - j)`.
pub fn reflect_horizontal<T: Real>(image: &Tensor<T>) -> Result<Tensor<T>> {
    let (x, y, c) = image.dims3("reflect_horizontal")?;
    let mut data = Vec::with_capacity(image.len());
    for row in image.data().chunks_exact(y * c) {
        for pixel in row.chunks_exact(c).rev() {
            data.extend_from_slice(pixel);
        }
    }
    Tensor::new(vec![x, y, c], data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub enable_vertical: bool,
    pub enable_horizontal: bool,
    pub keep_original: bool,
    pub shuffle_seed: u64,
}

impl AugmentationPolicy {
    /// Halves plus their mirrors: four images per input.
    pub fn vertical(seed: u64) -> Self {
        Self {
            enable_vertical: true,
            enable_horizontal: false,
            keep_original: false,
            shuffle_seed: seed,
        }
    }

    /// The vertical set plus a horizontal reflection of each: eight per input.
    pub fn vertical_horizontal(seed: u64) -> Self {
        Self {
            enable_horizontal: true,
            ..Self::vertical(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.enable_vertical || self.enable_horizontal || self.keep_original) {
            return Err(Error::InvalidArgument(
                "augmentation policy produces no images; enable vertical, horizontal or keep_original"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Images derived from each input under this policy.
    pub fn multiplier(&self) -> usize {
        let base = usize::from(self.keep_original) + if self.enable_vertical { 4 } else { 0 };
        match (self.enable_horizontal, base) {
            (false, n) => n,
            (true, 0) => 1,
            (true, n) => 2 * n,
        }
    }
}

/// Every image the policy derives from one input, before shuffling.
///
/// Order: original (if kept), then `left, mirror(left), right, mirror(right)`,
/// then horizontal reflections of all of those. With only the horizontal
/// flag set the single output is the reflected original.
pub fn derive_images<T: Real>(
    image: &Tensor<T>,
    policy: &AugmentationPolicy,
) -> Result<Vec<Tensor<T>>> {
    policy.validate()?;
    let mut out = Vec::with_capacity(policy.multiplier());
    if policy.keep_original {
        out.push(image.clone());
    }
    if policy.enable_vertical {
        let SplitPair { left, right } = split_vertical(image)?;
        let left_mirror = mirror(&left)?;
        let right_mirror = mirror(&right)?;
        out.extend([left, left_mirror, right, right_mirror]);
    }
    if policy.enable_horizontal {
        if out.is_empty() {
            out.push(reflect_horizontal(image)?);
        } else {
            let reflected = out
                .iter()
                .map(reflect_horizontal)
                .collect::<Result<Vec<_>>>()?;
            out.extend(reflected);
        }
    }
    Ok(out)
}

/// Applies the policy to every sample, copies labels unchanged, then
/// shuffles with the policy seed.
pub fn augment_dataset(
    samples: &[LabeledSample],
    policy: &AugmentationPolicy,
) -> Result<Vec<LabeledSample>> {
    if samples.is_empty() {
        return Err(Error::Empty("augmentation needs at least one sample"));
    }
    policy.validate()?;
    let mut out = Vec::with_capacity(samples.len() * policy.multiplier());
    for sample in samples {
        for image in derive_images(&sample.image, policy)? {
            out.push(LabeledSample {
                image,
                label: sample.label,
            });
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(policy.shuffle_seed));
    Ok(out)
}

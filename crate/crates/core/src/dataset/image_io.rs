use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Model input resolution used throughout the original pipeline.
pub const MODEL_INPUT_SIZE: usize = 224;

/// Byte intensities divided by 255, laid out `H x W x 3`.
pub fn image_to_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&b| f32::from(b) / 255.0).collect();
    Tensor::new(vec![h as usize, w as usize, 3], data).expect("RGB buffer matches dimensions")
}

/// Inverse of [`image_to_tensor`] for values produced from bytes.
pub fn tensor_to_image<T: Real>(t: &Tensor<T>) -> Result<RgbImage> {
    let (h, w, c) = t.dims3("tensor_to_image")?;
    if c != 3 {
        return Err(Error::shape(
            "tensor_to_image",
            format!("expected 3 channels, got {c}"),
        ));
    }
    let bytes = t
        .data()
        .iter()
        .map(|&v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer sized from tensor"))
}

/// Nearest-neighbour resize with integer index arithmetic, so results do
/// not depend on platform float behaviour.
pub fn resize_nearest<T: Real>(t: &Tensor<T>, height: usize, width: usize) -> Result<Tensor<T>> {
    let (h, w, c) = t.dims3("resize_nearest")?;
    if height == 0 || width == 0 {
        return Err(Error::shape(
            "resize_nearest",
            "target size must be positive",
        ));
    }
    if (h, w) == (height, width) {
        return Ok(t.clone());
    }
    let src = t.data();
    let mut out = Vec::with_capacity(height * width * c);
    for i in 0..height {
        let si = i * h / height;
        for j in 0..width {
            let sj = j * w / width;
            let start = (si * w + sj) * c;
            out.extend_from_slice(&src[start..start + c]);
        }
    }
    Tensor::new(vec![height, width, c], out)
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    Ok(img.to_rgb8())
}

/// Decode, normalise to `[0, 1]` and resize to `height x width`.
pub fn load_image(path: &Path, height: usize, width: usize) -> Result<Tensor<f32>> {
    let ingest = |reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| ingest(e.to_string()))?;
    let img = decode_image(&bytes).map_err(|e| ingest(e.to_string()))?;
    resize_nearest(&image_to_tensor(&img), height, width)
}

//! Labels, normalisation, AQI classes, manifests and the synthetic haze set.

mod aqi;
mod image_io;
mod manifest;
mod pollutant;
mod scaler;
pub mod synthetic;

pub use aqi::{classify_aqi, AqiClass, AqiTable};
pub use image_io::{
    decode_image, image_to_tensor, load_image, resize_nearest, tensor_to_image, MODEL_INPUT_SIZE,
};
pub use manifest::{
    split_indices, split_train_test, DatasetManifest, ManifestRecord, Source, Split,
    MANIFEST_HEADER,
};
pub use pollutant::{Parameter, PollutantVector, PARAMETER_COUNT, POLLUTANT_HEAD, REMAINING_HEAD};
pub use scaler::{LabelScaler, Range};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticSample};

use crate::tensor::Tensor;

/// Image tensor paired with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: Tensor<f32>,
    pub label: PollutantVector,
}

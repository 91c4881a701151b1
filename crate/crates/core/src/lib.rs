pub mod augmentation;
pub mod dataset;
pub mod error;
pub mod model;
pub mod ops;
pub mod recommendation;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};

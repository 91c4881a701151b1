//! Forward and backward kernels used by the model.

mod activation;
mod conv;
mod dense;
mod gradcheck;
mod loss;
mod pool;
mod tape;

pub use activation::{
    leaky_relu, leaky_relu_backward, leaky_relu_derivative, leaky_relu_recorded, leaky_relu_scalar,
    DEFAULT_LEAKY_SLOPE,
};
pub use conv::{
    conv2d_backward, conv2d_forward, conv2d_forward_recorded, ConvFilterBank, ConvGrads,
};
pub use dense::{
    dense_backward, dense_forward, dense_forward_recorded, flatten, flatten_backward,
    flatten_recorded, DenseGrads, DenseLayer,
};
pub use gradcheck::{
    finite_difference_gradient, max_relative_error, relative_error, RELATIVE_FLOOR,
};
pub use loss::{mae, mse, mse_grad};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, maxpool2x2_forward_recorded};
pub use tape::{GradientTape, TapeEntry};

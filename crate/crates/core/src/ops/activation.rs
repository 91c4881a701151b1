use super::tape::{GradientTape, LeakyReluRecord, TapeEntry};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu_scalar<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        slope * x
    }
}

/// Derivative used by the backward pass; `x == 0` takes the negative branch.
#[inline]
pub fn leaky_relu_derivative<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

pub fn leaky_relu<T: Real>(input: &Tensor<T>, slope: T) -> Tensor<T> {
    input.map(|x| leaky_relu_scalar(x, slope))
}

pub fn leaky_relu_recorded<T: Real>(
    input: &Tensor<T>,
    slope: T,
    tape: &mut GradientTape<T>,
) -> Tensor<T> {
    let out = leaky_relu(input, slope);
    tape.push(TapeEntry::LeakyRelu(LeakyReluRecord {
        input: input.clone(),
        slope,
    }));
    out
}

pub fn leaky_relu_backward<T: Real>(
    tape: &mut GradientTape<T>,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    let record = tape.pop_leaky_relu()?;
    if record.input.shape() != upstream.shape() {
        return Err(Error::shape(
            "leaky_relu_backward",
            format!(
                "upstream {:?} vs recorded input {:?}",
                upstream.shape(),
                record.input.shape()
            ),
        ));
    }
    let slope = record.slope;
    let data = record
        .input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| g * leaky_relu_derivative(x, slope))
        .collect();
    Tensor::new(upstream.shape().to_vec(), data)
}

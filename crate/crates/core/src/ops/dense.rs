use rand::Rng;

use super::tape::{DenseRecord, FlattenRecord, GradientTape, TapeEntry};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Fully connected layer: `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let outputs = match *weights.shape() {
            [m, _] => m,
            _ => {
                return Err(Error::shape(
                    "dense",
                    format!("weights must be a matrix, got {:?}", weights.shape()),
                ))
            }
        };
        if bias.shape() != [outputs] {
            return Err(Error::shape(
                "dense",
                format!("bias must have {outputs} entries, got {:?}", bias.shape()),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Uniform in `±1/sqrt(inputs)`.
    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = |_| T::from_f64_lossy(rng.random_range(-bound..bound));
        Self {
            weights: Tensor::from_fn(&[outputs, inputs], &mut draw),
            bias: Tensor::from_fn(&[outputs], &mut draw),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn affine<T: Real>(x: &[T], layer: &DenseLayer<T>) -> Vec<T> {
    let n = layer.inputs();
    layer
        .weights
        .data()
        .chunks_exact(n)
        .zip(layer.bias.data())
        .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
        .collect()
}

fn check_input<T: Real>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<()> {
    if input.rank() != 1 || input.len() != layer.inputs() {
        return Err(Error::shape(
            "dense",
            format!(
                "layer expects a vector of {} inputs, got shape {:?}",
                layer.inputs(),
                input.shape()
            ),
        ));
    }
    Ok(())
}

pub fn dense_forward<T: Real>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<Tensor<T>> {
    check_input(input, layer)?;
    Ok(Tensor::vector(affine(input.data(), layer)))
}

pub fn dense_forward_recorded<T: Real>(
    input: &Tensor<T>,
    layer: &DenseLayer<T>,
    tape: &mut GradientTape<T>,
) -> Result<Tensor<T>> {
    check_input(input, layer)?;
    let out = affine(input.data(), layer);
    tape.push(TapeEntry::Dense(DenseRecord {
        input: input.data().to_vec(),
    }));
    Ok(Tensor::vector(out))
}

pub fn dense_backward<T: Real>(
    tape: &mut GradientTape<T>,
    layer: &DenseLayer<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let record = tape.pop_dense()?;
    let (m, n) = (layer.outputs(), layer.inputs());
    if upstream.len() != m || record.input.len() != n {
        return Err(Error::shape(
            "dense_backward",
            format!(
                "layer is {m}x{n}, upstream has {} values, recorded input {}",
                upstream.len(),
                record.input.len()
            ),
        ));
    }
    let dy = upstream.data();
    let mut dweights = vec![T::zero(); m * n];
    let mut dinput = vec![T::zero(); n];
    for ((row_grad, row_w), &g) in dweights
        .chunks_exact_mut(n)
        .zip(layer.weights.data().chunks_exact(n))
        .zip(dy)
    {
        for ((dw, &x), (dx, &w)) in row_grad
            .iter_mut()
            .zip(&record.input)
            .zip(dinput.iter_mut().zip(row_w))
        {
            *dw = g * x;
            *dx += g * w;
        }
    }
    Ok(DenseGrads {
        input: Tensor::vector(dinput),
        weights: Tensor::new(vec![m, n], dweights)?,
        bias: Tensor::vector(dy.to_vec()),
    })
}

/// Row-major linearisation of any tensor.
pub fn flatten<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    Tensor::vector(input.data().to_vec())
}

pub fn flatten_recorded<T: Real>(input: &Tensor<T>, tape: &mut GradientTape<T>) -> Tensor<T> {
    tape.push(TapeEntry::Flatten(FlattenRecord {
        shape: input.shape().to_vec(),
    }));
    flatten(input)
}

pub fn flatten_backward<T: Real>(
    tape: &mut GradientTape<T>,
    upstream: Tensor<T>,
) -> Result<Tensor<T>> {
    let record = tape.pop_flatten()?;
    upstream.reshape(&record.shape)
}

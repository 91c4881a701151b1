//! Valid (no padding, unit step) 2-D convolution over `H x W x C` tensors.
//!
//! The forward pass lowers the input to an im2col patch matrix and runs a
//! single GEMM against the filter bank; the patch matrix is what the tape
//! keeps for the weight gradient.

use rand::Rng;

use super::tape::{ConvRecord, GradientTape, TapeEntry};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// `count x kh x kw x in_channels` weights plus one bias per filter.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvFilterBank<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    /// `None` when the caller asked for parameter gradients only.
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvFilterBank<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [count, kh, kw, _cin] = match *weights.shape() {
            [a, b, c, d] => [a, b, c, d],
            _ => {
                return Err(Error::shape(
                    "conv2d",
                    format!(
                        "filter weights must be count x kh x kw x cin, got {:?}",
                        weights.shape()
                    ),
                ))
            }
        };
        if kh != kw {
            return Err(Error::shape(
                "conv2d",
                format!("filters must be square, got {kh}x{kw}"),
            ));
        }
        if bias.shape() != [count] {
            return Err(Error::shape(
                "conv2d",
                format!("bias must have {count} entries, got {:?}", bias.shape()),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(count: usize, kernel: usize, in_channels: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[count, kernel, kernel, in_channels]),
            bias: Tensor::zeros(&[count]),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases.
    pub fn uniform<R: Rng>(count: usize, kernel: usize, in_channels: usize, rng: &mut R) -> Self {
        let fan_in = kernel * kernel * in_channels;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |_| T::from_f64_lossy(rng.random_range(-bound..bound));
        Self {
            weights: Tensor::from_fn(&[count, kernel, kernel, in_channels], &mut draw),
            bias: Tensor::from_fn(&[count], &mut draw),
        }
    }

    pub fn count(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[3]
    }

    fn patch_len(&self) -> usize {
        self.kernel() * self.kernel() * self.in_channels()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn check_input<T: Real>(
    input: &Tensor<T>,
    bank: &ConvFilterBank<T>,
) -> Result<(usize, usize, usize)> {
    let (h, w, c) = input.dims3("conv2d")?;
    let k = bank.kernel();
    if h < k || w < k {
        return Err(Error::shape(
            "conv2d",
            format!("input {h}x{w} is smaller than the {k}x{k} kernel"),
        ));
    }
    if c != bank.in_channels() {
        return Err(Error::shape(
            "conv2d",
            format!(
                "input has {c} channels but filters expect {}",
                bank.in_channels()
            ),
        ));
    }
    Ok((h, w, c))
}

fn im2col<T: Real>(input: &Tensor<T>, kernel: usize) -> (Vec<T>, usize, usize) {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
    let row = kernel * c;
    let patch = kernel * row;
    let src = input.data();
    let mut patches = vec![T::zero(); oh * ow * patch];
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = &mut patches[(oy * ow + ox) * patch..][..patch];
            for ky in 0..kernel {
                let start = ((oy + ky) * w + ox) * c;
                dst[ky * row..(ky + 1) * row].copy_from_slice(&src[start..start + row]);
            }
        }
    }
    (patches, oh, ow)
}

fn apply_filters<T: Real>(patches: &[T], positions: usize, bank: &ConvFilterBank<T>) -> Vec<T> {
    let filters = bank.count();
    let k = bank.patch_len();
    let mut out = Vec::with_capacity(positions * filters);
    for _ in 0..positions {
        out.extend_from_slice(bank.bias.data());
    }
    T::gemm(
        positions,
        k,
        filters,
        T::one(),
        patches,
        k as isize,
        1,
        bank.weights.data(),
        1,
        k as isize,
        T::one(),
        &mut out,
        filters as isize,
        1,
    );
    out
}

pub fn conv2d_forward<T: Real>(input: &Tensor<T>, bank: &ConvFilterBank<T>) -> Result<Tensor<T>> {
    check_input(input, bank)?;
    let (patches, oh, ow) = im2col(input, bank.kernel());
    let out = apply_filters(&patches, oh * ow, bank);
    Tensor::new(vec![oh, ow, bank.count()], out)
}

pub fn conv2d_forward_recorded<T: Real>(
    input: &Tensor<T>,
    bank: &ConvFilterBank<T>,
    tape: &mut GradientTape<T>,
) -> Result<Tensor<T>> {
    let (h, w, c) = check_input(input, bank)?;
    let (patches, oh, ow) = im2col(input, bank.kernel());
    let out = apply_filters(&patches, oh * ow, bank);
    tape.push(TapeEntry::Conv(ConvRecord {
        input_shape: [h, w, c],
        out_hw: (oh, ow),
        patches,
    }));
    Tensor::new(vec![oh, ow, bank.count()], out)
}

/// Pops the matching convolution record and returns input, weight and bias
/// gradients. Set `with_input` to false for a first layer whose input is
/// data rather than an activation.
pub fn conv2d_backward<T: Real>(
    tape: &mut GradientTape<T>,
    bank: &ConvFilterBank<T>,
    upstream: &Tensor<T>,
    with_input: bool,
) -> Result<ConvGrads<T>> {
    let record = tape.pop_conv()?;
    let (oh, ow) = record.out_hw;
    let filters = bank.count();
    if upstream.shape() != [oh, ow, filters] {
        return Err(Error::shape(
            "conv2d_backward",
            format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                [oh, ow, filters]
            ),
        ));
    }
    let k = bank.patch_len();
    if record.patches.len() != oh * ow * k {
        return Err(Error::shape(
            "conv2d_backward",
            "tape record was produced by a different filter bank",
        ));
    }
    let positions = oh * ow;
    let dout = upstream.data();

    let mut dbias = vec![T::zero(); filters];
    for row in dout.chunks_exact(filters) {
        for (b, &g) in dbias.iter_mut().zip(row) {
            *b += g;
        }
    }

    // dW[f, :] = sum_p dout[p, f] * patches[p, :]
    let mut dweights = vec![T::zero(); filters * k];
    T::gemm(
        filters,
        positions,
        k,
        T::one(),
        dout,
        1,
        filters as isize,
        &record.patches,
        k as isize,
        1,
        T::zero(),
        &mut dweights,
        k as isize,
        1,
    );

    let input = if with_input {
        let mut dpatches = vec![T::zero(); positions * k];
        T::gemm(
            positions,
            filters,
            k,
            T::one(),
            dout,
            filters as isize,
            1,
            bank.weights.data(),
            k as isize,
            1,
            T::zero(),
            &mut dpatches,
            k as isize,
            1,
        );
        let [h, w, c] = record.input_shape;
        let kernel = bank.kernel();
        let row = kernel * c;
        let mut dinput = vec![T::zero(); h * w * c];
        for oy in 0..oh {
            for ox in 0..ow {
                let src = &dpatches[(oy * ow + ox) * k..][..k];
                for ky in 0..kernel {
                    let start = ((oy + ky) * w + ox) * c;
                    for (d, &g) in dinput[start..start + row]
                        .iter_mut()
                        .zip(&src[ky * row..(ky + 1) * row])
                    {
                        *d += g;
                    }
                }
            }
        }
        Some(Tensor::new(vec![h, w, c], dinput)?)
    } else {
        None
    };

    Ok(ConvGrads {
        input,
        weights: Tensor::new(bank.weights.shape().to_vec(), dweights)?,
        bias: Tensor::vector(dbias),
    })
}

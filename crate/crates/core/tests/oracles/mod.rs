//! Brute-force references shared by the integration suites.
#![allow(dead_code)]

use healthcam_core::model::{Architecture, Heads, ModelConfig, ModelGraph};
use healthcam_core::ops::{finite_difference_gradient, max_relative_error};
use healthcam_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POLLUTANT_HEAD: usize = 2;
pub const OUTPUTS: usize = 7;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Nested-loop valid convolution. `weights` is `count x k x k x cin`.
pub fn conv_reference(
    input: &Tensor<f64>,
    weights: &Tensor<f64>,
    bias: &Tensor<f64>,
) -> Tensor<f64> {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (count, k) = (weights.shape()[0], weights.shape()[1]);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Vec::with_capacity(oh * ow * count);
    for y in 0..oh {
        for x in 0..ow {
            for f in 0..count {
                let mut acc = bias.data()[f];
                for ky in 0..k {
                    for kx in 0..k {
                        for ch in 0..c {
                            let wi = ((f * k + ky) * k + kx) * c + ch;
                            acc += weights.data()[wi] * input.get3(y + ky, x + kx, ch);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    Tensor::new(vec![oh, ow, count], out).unwrap()
}

/// `weights` is `outputs x inputs`.
pub fn dense_reference(input: &[f64], weights: &Tensor<f64>, bias: &Tensor<f64>) -> Vec<f64> {
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    (0..m)
        .map(|i| {
            bias.data()[i]
                + (0..n)
                    .map(|j| weights.data()[i * n + j] * input[j])
                    .sum::<f64>()
        })
        .collect()
}

/// 2x2 windows, odd edges dropped, ties resolved to the first cell in
/// row-major order. Returns the pooled values and the winning flat indices.
pub fn maxpool_reference(input: &Tensor<f64>) -> (Tensor<f64>, Vec<usize>) {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let mut out = Vec::new();
    let mut winners = Vec::new();
    for y in 0..h / 2 {
        for x in 0..w / 2 {
            for ch in 0..c {
                let mut best: Option<(f64, usize)> = None;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
                        let v = input.data()[idx];
                        if best.is_none_or(|(b, _)| v > b) {
                            best = Some((v, idx));
                        }
                    }
                }
                let (v, idx) = best.unwrap();
                out.push(v);
                winners.push(idx);
            }
        }
    }
    (Tensor::new(vec![h / 2, w / 2, c], out).unwrap(), winners)
}

pub fn leaky_reference(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn head_mse(p: &[f64], t: &[f64]) -> f64 {
    p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

/// Training loss for one sample, written out independently of the crate.
pub fn reference_loss(architecture: Architecture, p: &[f64], t: &[f64]) -> f64 {
    match architecture {
        Architecture::Monolithic => head_mse(p, t),
        _ => {
            head_mse(&p[..POLLUTANT_HEAD], &t[..POLLUTANT_HEAD])
                + head_mse(&p[POLLUTANT_HEAD..], &t[POLLUTANT_HEAD..])
        }
    }
}

fn reference_loss_grad(architecture: Architecture, p: &[f64], t: &[f64]) -> Vec<f64> {
    (0..OUTPUTS)
        .map(|i| {
            let width = match architecture {
                Architecture::Monolithic => OUTPUTS,
                _ if i < POLLUTANT_HEAD => POLLUTANT_HEAD,
                _ => OUTPUTS - POLLUTANT_HEAD,
            };
            2.0 * (p[i] - t[i]) / width as f64
        })
        .collect()
}

fn remaining_head_len(model: &ModelGraph<f64>) -> usize {
    match model.heads() {
        Heads::TwoStage { remaining, .. } => remaining.parameter_count(),
        _ => 0,
    }
}

pub struct GradientCheck {
    pub max_relative_error: f64,
    pub parameters: usize,
}

/// Analytic parameter gradient of the training loss against central
/// differences, in `f64`, for one random image and target.
///
/// For the two-stage model the second head sees the first head's outputs
/// as constants, so the reference differentiates the five-output loss only
/// with respect to the second head's own parameters.
pub fn model_gradient_check(config: &ModelConfig, seed: u64, step: f64) -> GradientCheck {
    let architecture = config.architecture;
    let model = ModelGraph::<f64>::build(config.clone(), seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let image = Tensor::from_fn(&config.input_shape(), |_| r.random_range(0.0..1.0));
    let target: Vec<f64> = (0..OUTPUTS).map(|_| r.random_range(0.0..1.0)).collect();

    let trace = model.forward_traced(&image).unwrap();
    let seed_grad = reference_loss_grad(architecture, trace.outputs.data(), &target);
    let analytic = model
        .backward(trace, &Tensor::vector(seed_grad))
        .unwrap()
        .flat();

    let flat = Tensor::vector(model.flat_parameters());
    let (image, target, model) = (&image, &target, &model);
    let loss_with = |pick: fn(Architecture, &[f64], &[f64]) -> f64| {
        let probe = std::cell::RefCell::new(model.clone());
        move |params: &Tensor<f64>| {
            let mut probe = probe.borrow_mut();
            probe.set_flat_parameters(params.data()).unwrap();
            let out = probe.predict(image).unwrap();
            pick(architecture, out.data(), target)
        }
    };
    let full = finite_difference_gradient(loss_with(reference_loss), &flat, step).unwrap();
    let numeric = match architecture {
        Architecture::TwoStage => {
            let first_stage = |_: Architecture, p: &[f64], t: &[f64]| {
                head_mse(&p[..POLLUTANT_HEAD], &t[..POLLUTANT_HEAD])
            };
            let upstream = finite_difference_gradient(loss_with(first_stage), &flat, step).unwrap();
            let split = flat.len() - remaining_head_len(model);
            let mut g = upstream.data()[..split].to_vec();
            g.extend_from_slice(&full.data()[split..]);
            g
        }
        _ => full.into_data(),
    };
    GradientCheck {
        max_relative_error: max_relative_error(&analytic, &numeric),
        parameters: flat.len(),
    }
}

/// The reduced configuration the full-model check runs on.
pub fn reduced_config(architecture: Architecture) -> ModelConfig {
    ModelConfig {
        input_height: 16,
        input_width: 16,
        input_channels: 3,
        conv_filters: [2, 2, 2],
        kernel: 2,
        pool: 2,
        leaky_slope: 0.01,
        hidden_units: 4,
        architecture,
    }
}

/// Same reduced widths with the production 3x3 kernel; 30x30 is the
/// smallest square input that survives three 3x3-conv plus pool stages
/// with a 2x2 final map.
pub fn reduced_config_kernel3(architecture: Architecture) -> ModelConfig {
    ModelConfig {
        input_height: 30,
        input_width: 30,
        kernel: 3,
        ..reduced_config(architecture)
    }
}

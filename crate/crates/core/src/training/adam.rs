use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "invalid Adam constants: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&Tensor<T>]) -> Result<Self> {
        config.validate()?;
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        })
    }
}

/// One bias-corrected Adam update.
///
/// All gradients are checked before anything is touched, so a non-finite
/// gradient leaves both parameters and state unchanged.
pub fn adam_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} parameters, {} gradients, {} moment tensors",
                params.len(),
                grads.len(),
                state.first.len()
            ),
        ));
    }
    for (index, ((p, g), m)) in params.iter().zip(grads).zip(&state.first).enumerate() {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "tensor {index}: parameter {:?}, gradient {:?}",
                    p.shape(),
                    g.shape()
                ),
            ));
        }
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                name: format!("tensor {index}, element {pos}"),
            });
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let (b1, b2) = (T::from_f64_lossy(beta1), T::from_f64_lossy(beta2));
    let (one_b1, one_b2) = (
        T::from_f64_lossy(1.0 - beta1),
        T::from_f64_lossy(1.0 - beta2),
    );
    let (c1, c2) = (T::from_f64_lossy(c1), T::from_f64_lossy(c2));
    let (lr, eps) = (T::from_f64_lossy(learning_rate), T::from_f64_lossy(epsilon));

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        for (((theta, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

//! Central finite differences, the oracle the analytic backward passes are
//! checked against. Always evaluated in `f64`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients below this magnitude are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_difference_gradient<F>(f: F, at: &Tensor<f64>, step: f64) -> Result<Tensor<f64>>
where
    F: Fn(&Tensor<f64>) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut probe = at.clone();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + step;
        let plus = f(&probe);
        probe.data_mut()[i] = original - step;
        let minus = f(&probe);
        probe.data_mut()[i] = original;
        grad.push((plus - minus) / (2.0 * step));
    }
    Tensor::new(at.shape().to_vec(), grad)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

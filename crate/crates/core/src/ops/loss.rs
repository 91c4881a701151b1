use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn check<T: Real>(op: &'static str, pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            op,
            format!(
                "prediction {:?} vs target {:?}",
                pred.shape(),
                target.shape()
            ),
        ));
    }
    Ok(())
}

/// Mean squared error, accumulated in `f64`.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check("mse", pred, target)?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p.as_f64() - t.as_f64();
            d * d
        })
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn mae<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check("mae", pred, target)?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p.as_f64() - t.as_f64()).abs())
        .sum();
    Ok(total / pred.len() as f64)
}

/// `d mse / d pred = 2 (pred - target) / N`.
pub fn mse_grad<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    check("mse_grad", pred, target)?;
    let scale = T::from_f64_lossy(2.0 / pred.len() as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| scale * (p - t))
        .collect();
    Tensor::new(pred.shape().to_vec(), data)
}

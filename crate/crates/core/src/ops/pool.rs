//! Non-overlapping 2x2 max-pooling. Odd trailing rows/columns are dropped.

use super::tape::{GradientTape, MaxPoolRecord, TapeEntry};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn pool<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (h, w, c) = input.dims3("maxpool2x2")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(
            "maxpool2x2",
            format!("input {h}x{w} is smaller than the 2x2 window"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            let base = ((2 * oy) * w + 2 * ox) * c;
            for ch in 0..c {
                // Row-major scan with strict comparison: ties keep the first.
                let candidates = [
                    base + ch,
                    base + c + ch,
                    base + w * c + ch,
                    base + (w + 1) * c + ch,
                ];
                let mut best = candidates[0];
                for &idx in &candidates[1..] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.push(src[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, argmax))
}

pub fn maxpool2x2_forward<T: Real>(input: &Tensor<T>) -> Result<Tensor<T>> {
    pool(input).map(|(out, _)| out)
}

pub fn maxpool2x2_forward_recorded<T: Real>(
    input: &Tensor<T>,
    tape: &mut GradientTape<T>,
) -> Result<Tensor<T>> {
    let (out, argmax) = pool(input)?;
    tape.push(TapeEntry::MaxPool(MaxPoolRecord {
        input_shape: input.shape().to_vec(),
        argmax,
    }));
    Ok(out)
}

/// Routes each upstream value to the recorded winner of its window.
pub fn maxpool2x2_backward<T: Real>(
    tape: &mut GradientTape<T>,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    let record = tape.pop_maxpool()?;
    if upstream.len() != record.argmax.len() {
        return Err(Error::shape(
            "maxpool2x2_backward",
            format!(
                "upstream has {} values, pooled output had {}",
                upstream.len(),
                record.argmax.len()
            ),
        ));
    }
    let mut grad = Tensor::zeros(&record.input_shape);
    let dst = grad.data_mut();
    for (&idx, &g) in record.argmax.iter().zip(upstream.data()) {
        dst[idx] += g;
    }
    Ok(grad)
}

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::dataset::{resize_nearest, LabelScaler, LabeledSample, PARAMETER_COUNT, POLLUTANT_HEAD};
use crate::error::{Error, Result};
use crate::model::{Architecture, Gradients, ModelConfig, ModelGraph};
use crate::tensor::Tensor;

/// Samples per parallel work unit. Chunk gradients are summed in chunk
/// order, so results do not depend on the thread count.
pub const REDUCTION_CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// A model-ready input with its min-max scaled target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub image: Tensor<f32>,
    pub target: [f32; PARAMETER_COUNT],
}

/// Resizes each image to the model input (nearest neighbour) and scales its
/// label.
pub fn prepare_examples(
    samples: &[LabeledSample],
    scaler: &LabelScaler,
    config: &ModelConfig,
) -> Result<Vec<TrainingExample>> {
    samples
        .par_iter()
        .map(|s| {
            let image = resize_nearest(&s.image, config.input_height, config.input_width)?;
            Ok(TrainingExample {
                image,
                target: scaler.scale(&s.label).map(|v| v as f32),
            })
        })
        .collect()
}

/// Normalised-scale errors: all seven outputs, then each head's slice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub pollutant_mse: f64,
    pub pollutant_mae: f64,
    pub remaining_mse: f64,
    pub remaining_mae: f64,
}

impl Metrics {
    pub fn is_finite(&self) -> bool {
        [
            self.mse,
            self.mae,
            self.pollutant_mse,
            self.pollutant_mae,
            self.remaining_mse,
            self.remaining_mae,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Default)]
struct MetricSums {
    count: usize,
    sq: [f64; PARAMETER_COUNT],
    abs: [f64; PARAMETER_COUNT],
}

impl MetricSums {
    fn add(&mut self, prediction: &[f32], target: &[f32; PARAMETER_COUNT]) {
        self.count += 1;
        for (i, (&p, &t)) in prediction.iter().zip(target).enumerate() {
            let d = f64::from(p) - f64::from(t);
            self.sq[i] += d * d;
            self.abs[i] += d.abs();
        }
    }

    fn finish(&self) -> Metrics {
        let n = self.count.max(1) as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / (n * v.len() as f64);
        Metrics {
            mse: mean(&self.sq),
            mae: mean(&self.abs),
            pollutant_mse: mean(&self.sq[..POLLUTANT_HEAD]),
            pollutant_mae: mean(&self.abs[..POLLUTANT_HEAD]),
            remaining_mse: mean(&self.sq[POLLUTANT_HEAD..]),
            remaining_mae: mean(&self.abs[POLLUTANT_HEAD..]),
        }
    }
}

/// Per-sample output gradient of the training loss.
///
/// Split architectures minimise the sum of the two head MSEs; the
/// monolithic model minimises the MSE over all seven outputs.
pub fn loss_gradient(
    architecture: Architecture,
    prediction: &[f32],
    target: &[f32; PARAMETER_COUNT],
    batch: usize,
) -> Tensor<f32> {
    let b = batch as f32;
    let grad = prediction
        .iter()
        .zip(target)
        .enumerate()
        .map(|(i, (&p, &t))| {
            let width = match architecture {
                Architecture::Monolithic => PARAMETER_COUNT,
                _ if i < POLLUTANT_HEAD => POLLUTANT_HEAD,
                _ => PARAMETER_COUNT - POLLUTANT_HEAD,
            };
            2.0 * (p - t) / (width as f32 * b)
        })
        .collect();
    Tensor::vector(grad)
}

/// Value of the loss that [`loss_gradient`] differentiates, for one sample.
pub fn sample_loss(architecture: Architecture, prediction: &[f64], target: &[f64]) -> f64 {
    let sq = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / a.len() as f64
    };
    match architecture {
        Architecture::Monolithic => sq(prediction, target),
        _ => {
            sq(&prediction[..POLLUTANT_HEAD], &target[..POLLUTANT_HEAD])
                + sq(&prediction[POLLUTANT_HEAD..], &target[POLLUTANT_HEAD..])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Running average over the epoch's batches, measured before each update.
    pub train: Metrics,
    pub test: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub architecture: Architecture,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs: Vec<EpochRecord>,
    /// The returned model evaluated on the full training set.
    pub final_train: Metrics,
    pub final_test: Metrics,
    /// Predicting the training-set mean label for every test sample.
    pub baseline_test: Metrics,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Mean test MAE over the last `window` epochs.
    pub fn plateau_mae(&self, window: usize) -> Option<f64> {
        if self.epochs.is_empty() || window == 0 {
            return None;
        }
        let tail = &self.epochs[self.epochs.len().saturating_sub(window)..];
        Some(tail.iter().map(|e| e.test.mae).sum::<f64>() / tail.len() as f64)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Appends `epoch,arm,seed,mae,mse` rows (test metrics), with a header
    /// when `header` is set.
    pub fn write_curves<W: Write>(&self, out: &mut W, arm: &str, header: bool) -> Result<()> {
        if header {
            writeln!(out, "epoch,arm,seed,mae,mse")?;
        }
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, arm, self.seed, e.test.mae, e.test.mse
            )?;
        }
        Ok(())
    }

    pub fn save_curves(&self, path: &Path, arm: &str) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_curves(&mut file, arm, true)?;
        file.flush()?;
        Ok(())
    }
}

pub fn evaluate(model: &ModelGraph<f32>, examples: &[TrainingExample]) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let predictions = examples
        .par_iter()
        .map(|ex| model.predict(&ex.image))
        .collect::<Result<Vec<_>>>()?;
    let mut sums = MetricSums::default();
    for (p, ex) in predictions.iter().zip(examples) {
        sums.add(p.data(), &ex.target);
    }
    Ok(sums.finish())
}

/// Errors of always predicting the mean training target.
pub fn mean_baseline(train: &[TrainingExample], test: &[TrainingExample]) -> Result<Metrics> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("baseline needs train and test examples"));
    }
    let mut mean = [0f64; PARAMETER_COUNT];
    for ex in train {
        for (m, &t) in mean.iter_mut().zip(&ex.target) {
            *m += f64::from(t);
        }
    }
    let prediction = mean.map(|m| (m / train.len() as f64) as f32);
    let mut sums = MetricSums::default();
    for ex in test {
        sums.add(&prediction, &ex.target);
    }
    Ok(sums.finish())
}

fn batch_gradients(
    model: &ModelGraph<f32>,
    batch: &[&TrainingExample],
) -> Result<(Gradients<f32>, Vec<Tensor<f32>>)> {
    let architecture = model.architecture();
    let parts = batch
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            let mut grads = Gradients::zeros_like(model);
            let mut outputs = Vec::with_capacity(chunk.len());
            for ex in chunk {
                let trace = model.forward_traced(&ex.image)?;
                let output = trace.outputs.clone();
                let g = loss_gradient(architecture, output.data(), &ex.target, batch.len());
                grads.add_assign(&model.backward(trace, &g)?)?;
                outputs.push(output);
            }
            Ok((grads, outputs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Gradients::zeros_like(model);
    let mut outputs = Vec::with_capacity(batch.len());
    for (g, o) in parts {
        total.add_assign(&g)?;
        outputs.extend(o);
    }
    Ok((total, outputs))
}

/// Mini-batch Adam on `model`, with a seeded shuffle each epoch.
///
/// Bit-reproducible for fixed inputs: shuffles come from the seed and
/// gradient sums use a fixed reduction order.
pub fn train(
    model: &mut ModelGraph<f32>,
    train_set: &[TrainingExample],
    test_set: &[TrainingExample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "batch size must be at least 1".into(),
        ));
    }
    let started = Instant::now();
    let names = model.parameter_names();
    let mut state = AdamState::new(config.adam, &model.parameters())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut running = MetricSums::default();
        for indices in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingExample> = indices.iter().map(|&i| &train_set[i]).collect();
            let (grads, outputs) = batch_gradients(model, &batch)?;
            for (o, ex) in outputs.iter().zip(&batch) {
                running.add(o.data(), &ex.target);
            }
            adam_step(&mut model.parameters_mut(), &grads.tensors, &mut state).map_err(
                |e| match e {
                    Error::NonFinite { index, .. } => Error::NonFinite {
                        index,
                        name: format!("{} (epoch {epoch})", names[index]),
                    },
                    other => other,
                },
            )?;
        }
        let record = EpochRecord {
            epoch,
            train: running.finish(),
            test: evaluate(model, test_set)?,
        };
        if !record.train.is_finite() || !record.test.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "training diverged at epoch {epoch}: non-finite metrics"
            )));
        }
        epochs.push(record);
    }

    Ok(TrainReport {
        architecture: model.architecture(),
        model: model.config().clone(),
        train: *config,
        seed: config.seed,
        train_size: train_set.len(),
        test_size: test_set.len(),
        epochs,
        final_train: evaluate(model, train_set)?,
        final_test: evaluate(model, test_set)?,
        baseline_test: mean_baseline(train_set, test_set)?,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

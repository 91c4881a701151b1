//! Adam optimisation, the training loop and multi-seed experiments.

mod adam;
pub mod experiments;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use trainer::{
    evaluate, loss_gradient, mean_baseline, prepare_examples, sample_loss, train, EpochRecord,
    Metrics, TrainConfig, TrainReport, TrainingExample, REDUCTION_CHUNK,
};

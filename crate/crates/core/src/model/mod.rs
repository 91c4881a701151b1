//! Shared convolutional trunk with interchangeable dense heads.

mod checkpoint;
mod config;
mod graph;

pub use checkpoint::{Checkpoint, CheckpointHeader, ParameterEntry, FORMAT_VERSION, MAGIC};
pub use config::{Architecture, ModelConfig, StageShape};
pub use graph::{BatchOutput, ForwardTrace, Gradients, Heads, Mlp, ModelGraph, StageTrace};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// im2col patches of a convolution input, `positions x (kh * kw * cin)`.
#[derive(Clone, Debug)]
pub struct ConvRecord<T> {
    pub(crate) input_shape: [usize; 3],
    pub(crate) out_hw: (usize, usize),
    pub(crate) patches: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct LeakyReluRecord<T> {
    pub(crate) input: Tensor<T>,
    pub(crate) slope: T,
}

/// Flat input index of the winning cell for every pooled output.
#[derive(Clone, Debug)]
pub struct MaxPoolRecord {
    pub(crate) input_shape: Vec<usize>,
    pub(crate) argmax: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FlattenRecord {
    pub(crate) shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DenseRecord<T> {
    pub(crate) input: Vec<T>,
}

#[derive(Clone, Debug)]
pub enum TapeEntry<T> {
    Conv(ConvRecord<T>),
    LeakyRelu(LeakyReluRecord<T>),
    MaxPool(MaxPoolRecord),
    Flatten(FlattenRecord),
    Dense(DenseRecord<T>),
}

impl<T> TapeEntry<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            TapeEntry::Conv(_) => "conv2d",
            TapeEntry::LeakyRelu(_) => "leaky_relu",
            TapeEntry::MaxPool(_) => "maxpool2x2",
            TapeEntry::Flatten(_) => "flatten",
            TapeEntry::Dense(_) => "dense",
        }
    }
}

/// Stack of forward records. Backward kernels pop from the top, so the
/// backward pass must visit layers in exact reverse order of the forward.
#[derive(Clone, Debug)]
pub struct GradientTape<T> {
    entries: Vec<TapeEntry<T>>,
}

impl<T> Default for GradientTape<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

macro_rules! pop_kind {
    ($name:ident, $variant:ident, $record:ty, $label:literal) => {
        pub fn $name(&mut self) -> Result<$record> {
            match self.entries.pop() {
                Some(TapeEntry::$variant(record)) => Ok(record),
                Some(other) => {
                    let found = other.kind();
                    self.entries.push(other);
                    Err(Error::MissingTape {
                        expected: $label,
                        found,
                    })
                }
                None => Err(Error::MissingTape {
                    expected: $label,
                    found: "empty tape",
                }),
            }
        }
    };
}

impl<T> GradientTape<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TapeEntry<T>) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TapeEntry<T>] {
        &self.entries
    }

    pop_kind!(pop_conv, Conv, ConvRecord<T>, "conv2d");
    pop_kind!(pop_leaky_relu, LeakyRelu, LeakyReluRecord<T>, "leaky_relu");
    pop_kind!(pop_maxpool, MaxPool, MaxPoolRecord, "maxpool2x2");
    pop_kind!(pop_flatten, Flatten, FlattenRecord, "flatten");
    pop_kind!(pop_dense, Dense, DenseRecord<T>, "dense");
}

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Architecture, ModelConfig};
use crate::dataset::{PARAMETER_COUNT, POLLUTANT_HEAD, REMAINING_HEAD};
use crate::error::{Error, Result};
use crate::ops::{
    conv2d_backward, conv2d_forward, conv2d_forward_recorded, dense_backward, dense_forward,
    dense_forward_recorded, flatten, flatten_backward, flatten_recorded, leaky_relu,
    leaky_relu_backward, leaky_relu_recorded, maxpool2x2_backward, maxpool2x2_forward,
    maxpool2x2_forward_recorded, ConvFilterBank, DenseLayer, GradientTape,
};
use crate::tensor::{Real, Tensor};

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn next_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

/// One hidden layer with LeakyReLU, then a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub hidden: DenseLayer<T>,
    pub output: DenseLayer<T>,
}

impl<T: Real> Mlp<T> {
    fn uniform(inputs: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let hidden_layer = DenseLayer::uniform(inputs, hidden, rng);
        Self {
            hidden: hidden_layer,
            output: DenseLayer::uniform(hidden, outputs, rng),
        }
    }

    fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            hidden: DenseLayer::zeros(inputs, hidden),
            output: DenseLayer::zeros(hidden, outputs),
        }
    }

    fn forward(&self, input: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
        let h = leaky_relu(&dense_forward(input, &self.hidden)?, slope);
        dense_forward(&h, &self.output)
    }

    fn forward_recorded(
        &self,
        input: &Tensor<T>,
        slope: T,
        tape: &mut GradientTape<T>,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let z = dense_forward_recorded(input, &self.hidden, tape)?;
        let h = leaky_relu_recorded(&z, slope, tape);
        let out = dense_forward_recorded(&h, &self.output, tape)?;
        Ok((h, out))
    }

    /// Pops this head's three records; returns the input gradient and pushes
    /// parameter gradients in declared order.
    fn backward(
        &self,
        tape: &mut GradientTape<T>,
        upstream: &Tensor<T>,
        grads: &mut Vec<Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let out = dense_backward(tape, &self.output, upstream)?;
        let dz = leaky_relu_backward(tape, &out.input)?;
        let hidden = dense_backward(tape, &self.hidden, &dz)?;
        grads.extend([hidden.weights, hidden.bias, out.weights, out.bias]);
        Ok(hidden.input)
    }

    fn parameters(&self) -> [&Tensor<T>; 4] {
        [
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    fn parameters_mut(&mut self) -> [&mut Tensor<T>; 4] {
        [
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden.parameter_count() + self.output.parameter_count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Heads<T> {
    Branched {
        pollutant: Mlp<T>,
        remaining: Mlp<T>,
    },
    /// `remaining` reads the two pollutant predictions, not the features.
    TwoStage {
        pollutant: Mlp<T>,
        remaining: Mlp<T>,
    },
    Monolithic {
        combined: Mlp<T>,
    },
}

impl<T: Real> Heads<T> {
    fn named(&self) -> Vec<(&'static str, &Mlp<T>)> {
        match self {
            Heads::Branched {
                pollutant,
                remaining,
            }
            | Heads::TwoStage {
                pollutant,
                remaining,
            } => vec![("pollutant", pollutant), ("remaining", remaining)],
            Heads::Monolithic { combined } => vec![("combined", combined)],
        }
    }

    fn mlps_mut(&mut self) -> Vec<&mut Mlp<T>> {
        match self {
            Heads::Branched {
                pollutant,
                remaining,
            }
            | Heads::TwoStage {
                pollutant,
                remaining,
            } => vec![pollutant, remaining],
            Heads::Monolithic { combined } => vec![combined],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, m)| m.parameter_count()).sum()
    }
}

/// Intermediate tensors of one trunk stage: convolution output, activation,
/// pooled output.
#[derive(Clone, Debug)]
pub struct StageTrace<T> {
    pub conv: Tensor<T>,
    pub activated: Tensor<T>,
    pub pooled: Tensor<T>,
}

/// Everything a backward pass needs for one input.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    stamp: u64,
    pub stages: Vec<StageTrace<T>>,
    pub features: Tensor<T>,
    pub head_hidden: Vec<Tensor<T>>,
    /// All seven outputs: two pollutants then five remaining parameters.
    pub outputs: Tensor<T>,
    tape: GradientTape<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn pollutants(&self) -> &[T] {
        &self.outputs.data()[..POLLUTANT_HEAD]
    }

    pub fn remaining(&self) -> &[T] {
        &self.outputs.data()[POLLUTANT_HEAD..]
    }

    pub fn tape(&self) -> &GradientTape<T> {
        &self.tape
    }
}

#[derive(Clone, Debug)]
pub struct BatchOutput<T> {
    /// `batch x 2`
    pub pollutants: Tensor<T>,
    /// `batch x 5`
    pub remaining: Tensor<T>,
    pub traces: Vec<ForwardTrace<T>>,
}

/// Parameter gradients, aligned with [`ModelGraph::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &ModelGraph<T>) -> Self {
        Self {
            tensors: model
                .parameters()
                .into_iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape("gradients", "parameter lists differ"));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<T> {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}

/// Shared three-stage convolutional trunk plus the architecture's heads.
#[derive(Debug)]
pub struct ModelGraph<T = f32> {
    config: ModelConfig,
    convs: [ConvFilterBank<T>; 3],
    heads: Heads<T>,
    stamp: u64,
}

impl<T: Real> Clone for ModelGraph<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            convs: self.convs.clone(),
            heads: self.heads.clone(),
            stamp: next_stamp(),
        }
    }
}

impl<T: Real> PartialEq for ModelGraph<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.convs == other.convs && self.heads == other.heads
    }
}

fn head_input_width(config: &ModelConfig) -> Result<usize> {
    config.flatten_width()
}

impl<T: Real> ModelGraph<T> {
    /// Seeded uniform `±1/sqrt(fan_in)` initialisation. The trunk is drawn
    /// first, so architectures built from the same seed share trunk weights.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        let features = head_input_width(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut channels = config.input_channels;
        let convs = config.conv_filters.map(|filters| {
            let bank = ConvFilterBank::uniform(filters, config.kernel, channels, &mut rng);
            channels = filters;
            bank
        });
        let hidden = config.hidden_units;
        let heads = match config.architecture {
            Architecture::Branched => Heads::Branched {
                pollutant: Mlp::uniform(features, hidden, POLLUTANT_HEAD, &mut rng),
                remaining: Mlp::uniform(features, hidden, REMAINING_HEAD, &mut rng),
            },
            Architecture::TwoStage => Heads::TwoStage {
                pollutant: Mlp::uniform(features, hidden, POLLUTANT_HEAD, &mut rng),
                remaining: Mlp::uniform(POLLUTANT_HEAD, hidden, REMAINING_HEAD, &mut rng),
            },
            Architecture::Monolithic => Heads::Monolithic {
                combined: Mlp::uniform(features, hidden, PARAMETER_COUNT, &mut rng),
            },
        };
        Ok(Self {
            config,
            convs,
            heads,
            stamp: next_stamp(),
        })
    }

    /// All-zero parameters; useful for tests and as a load target.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let features = head_input_width(&config)?;
        let mut channels = config.input_channels;
        let convs = config.conv_filters.map(|filters| {
            let bank = ConvFilterBank::zeros(filters, config.kernel, channels);
            channels = filters;
            bank
        });
        let hidden = config.hidden_units;
        let heads = match config.architecture {
            Architecture::Branched => Heads::Branched {
                pollutant: Mlp::zeros(features, hidden, POLLUTANT_HEAD),
                remaining: Mlp::zeros(features, hidden, REMAINING_HEAD),
            },
            Architecture::TwoStage => Heads::TwoStage {
                pollutant: Mlp::zeros(features, hidden, POLLUTANT_HEAD),
                remaining: Mlp::zeros(POLLUTANT_HEAD, hidden, REMAINING_HEAD),
            },
            Architecture::Monolithic => Heads::Monolithic {
                combined: Mlp::zeros(features, hidden, PARAMETER_COUNT),
            },
        };
        Ok(Self {
            config,
            convs,
            heads,
            stamp: next_stamp(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn convs(&self) -> &[ConvFilterBank<T>; 3] {
        &self.convs
    }

    pub fn heads(&self) -> &Heads<T> {
        &self.heads
    }

    pub fn convs_mut(&mut self) -> &mut [ConvFilterBank<T>; 3] {
        self.stamp = next_stamp();
        &mut self.convs
    }

    pub fn heads_mut(&mut self) -> &mut Heads<T> {
        self.stamp = next_stamp();
        &mut self.heads
    }

    pub fn trunk_parameter_count(&self) -> usize {
        self.convs.iter().map(ConvFilterBank::parameter_count).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.trunk_parameter_count() + self.heads.parameter_count()
    }

    /// Parameters in declared order: each conv's weights then bias, then
    /// every head's hidden weights, hidden bias, output weights, output bias.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = Vec::new();
        for bank in &self.convs {
            out.extend([&bank.weights, &bank.bias]);
        }
        for (_, mlp) in self.heads.named() {
            out.extend(mlp.parameters());
        }
        out
    }

    /// Mutable access invalidates every outstanding trace.
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.stamp = next_stamp();
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        for bank in &mut self.convs {
            out.push(&mut bank.weights);
            out.push(&mut bank.bias);
        }
        for mlp in self.heads.mlps_mut() {
            out.extend(mlp.parameters_mut());
        }
        out
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=3 {
            names.push(format!("conv{i}.weights"));
            names.push(format!("conv{i}.bias"));
        }
        for (head, _) in self.heads.named() {
            for part in [
                "hidden.weights",
                "hidden.bias",
                "output.weights",
                "output.bias",
            ] {
                names.push(format!("{head}.{part}"));
            }
        }
        names
    }

    pub fn flat_parameters(&self) -> Vec<T> {
        self.parameters()
            .into_iter()
            .flat_map(|p| p.data().iter().copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::shape(
                "set_flat_parameters",
                format!(
                    "expected {} values, got {}",
                    self.parameter_count(),
                    values.len()
                ),
            ));
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        let cast_bank = |b: &ConvFilterBank<T>| ConvFilterBank {
            weights: b.weights.cast(),
            bias: b.bias.cast(),
        };
        let cast_dense = |d: &DenseLayer<T>| DenseLayer {
            weights: d.weights.cast(),
            bias: d.bias.cast(),
        };
        let cast_mlp = |m: &Mlp<T>| Mlp {
            hidden: cast_dense(&m.hidden),
            output: cast_dense(&m.output),
        };
        let heads = match &self.heads {
            Heads::Branched {
                pollutant,
                remaining,
            } => Heads::Branched {
                pollutant: cast_mlp(pollutant),
                remaining: cast_mlp(remaining),
            },
            Heads::TwoStage {
                pollutant,
                remaining,
            } => Heads::TwoStage {
                pollutant: cast_mlp(pollutant),
                remaining: cast_mlp(remaining),
            },
            Heads::Monolithic { combined } => Heads::Monolithic {
                combined: cast_mlp(combined),
            },
        };
        ModelGraph {
            config: self.config.clone(),
            convs: [
                cast_bank(&self.convs[0]),
                cast_bank(&self.convs[1]),
                cast_bank(&self.convs[2]),
            ],
            heads,
            stamp: next_stamp(),
        }
    }

    fn slope(&self) -> T {
        T::from_f64_lossy(self.config.leaky_slope)
    }

    fn check_input(&self, image: &Tensor<T>) -> Result<()> {
        let want = self.config.input_shape();
        if image.shape() != want {
            return Err(Error::shape(
                "forward",
                format!("model expects input {want:?}, got {:?}", image.shape()),
            ));
        }
        Ok(())
    }

    /// Inference for one image: the seven outputs in parameter order.
    pub fn predict(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(image)?;
        let slope = self.slope();
        let mut x = image.clone();
        for bank in &self.convs {
            x = maxpool2x2_forward(&leaky_relu(&conv2d_forward(&x, bank)?, slope))?;
        }
        let features = flatten(&x);
        let out = match &self.heads {
            Heads::Branched {
                pollutant,
                remaining,
            } => {
                let mut y = pollutant.forward(&features, slope)?.into_data();
                y.extend(remaining.forward(&features, slope)?.into_data());
                y
            }
            Heads::TwoStage {
                pollutant,
                remaining,
            } => {
                let y1 = pollutant.forward(&features, slope)?;
                let y2 = remaining.forward(&y1, slope)?;
                let mut y = y1.into_data();
                y.extend(y2.into_data());
                y
            }
            Heads::Monolithic { combined } => combined.forward(&features, slope)?.into_data(),
        };
        Ok(Tensor::vector(out))
    }

    pub fn forward_traced(&self, image: &Tensor<T>) -> Result<ForwardTrace<T>> {
        self.check_input(image)?;
        let slope = self.slope();
        let mut tape = GradientTape::new();
        let mut stages = Vec::with_capacity(3);
        let mut x = image.clone();
        for bank in &self.convs {
            let conv = conv2d_forward_recorded(&x, bank, &mut tape)?;
            let activated = leaky_relu_recorded(&conv, slope, &mut tape);
            let pooled = maxpool2x2_forward_recorded(&activated, &mut tape)?;
            x = pooled.clone();
            stages.push(StageTrace {
                conv,
                activated,
                pooled,
            });
        }
        let features = flatten_recorded(&x, &mut tape);
        let (head_hidden, outputs) = match &self.heads {
            Heads::Branched {
                pollutant,
                remaining,
            } => {
                let (h1, y1) = pollutant.forward_recorded(&features, slope, &mut tape)?;
                let (h2, y2) = remaining.forward_recorded(&features, slope, &mut tape)?;
                let mut y = y1.into_data();
                y.extend(y2.into_data());
                (vec![h1, h2], y)
            }
            Heads::TwoStage {
                pollutant,
                remaining,
            } => {
                let (h1, y1) = pollutant.forward_recorded(&features, slope, &mut tape)?;
                let (h2, y2) = remaining.forward_recorded(&y1, slope, &mut tape)?;
                let mut y = y1.into_data();
                y.extend(y2.into_data());
                (vec![h1, h2], y)
            }
            Heads::Monolithic { combined } => {
                let (h, y) = combined.forward_recorded(&features, slope, &mut tape)?;
                (vec![h], y.into_data())
            }
        };
        Ok(ForwardTrace {
            stamp: self.stamp,
            stages,
            features,
            head_hidden,
            outputs: Tensor::vector(outputs),
            tape,
        })
    }

    pub fn forward(&self, batch: &[Tensor<T>]) -> Result<BatchOutput<T>> {
        if batch.is_empty() {
            return Err(Error::Empty("forward needs at least one image"));
        }
        let traces = batch
            .par_iter()
            .map(|img| self.forward_traced(img))
            .collect::<Result<Vec<_>>>()?;
        let mut y1 = Vec::with_capacity(batch.len() * POLLUTANT_HEAD);
        let mut y2 = Vec::with_capacity(batch.len() * REMAINING_HEAD);
        for t in &traces {
            y1.extend_from_slice(t.pollutants());
            y2.extend_from_slice(t.remaining());
        }
        Ok(BatchOutput {
            pollutants: Tensor::new(vec![batch.len(), POLLUTANT_HEAD], y1)?,
            remaining: Tensor::new(vec![batch.len(), REMAINING_HEAD], y2)?,
            traces,
        })
    }

    /// Exact parameter gradients for one traced input, given `dL/dy` for the
    /// seven outputs.
    ///
    /// Branched: trunk gradients sum both heads' contributions. TwoStage:
    /// the second head's input gradient is dropped, so the pollutant
    /// predictions act as constants for the remaining-parameter loss.
    pub fn backward(
        &self,
        trace: ForwardTrace<T>,
        output_grad: &Tensor<T>,
    ) -> Result<Gradients<T>> {
        if trace.stamp != self.stamp {
            return Err(Error::StaleTrace);
        }
        if output_grad.len() != PARAMETER_COUNT {
            return Err(Error::shape(
                "backward",
                format!(
                    "expected {PARAMETER_COUNT} output gradients, got {}",
                    output_grad.len()
                ),
            ));
        }
        let mut tape = trace.tape;
        let g = output_grad.data();
        let g1 = Tensor::vector(g[..POLLUTANT_HEAD].to_vec());
        let g2 = Tensor::vector(g[POLLUTANT_HEAD..].to_vec());

        // Heads pop in reverse order; gradients are collected per head and
        // reordered to declared order afterwards.
        let mut head_grads: Vec<Vec<Tensor<T>>> = Vec::new();
        let d_features = match &self.heads {
            Heads::Branched {
                pollutant,
                remaining,
            } => {
                let mut second = Vec::with_capacity(4);
                let d2 = remaining.backward(&mut tape, &g2, &mut second)?;
                let mut first = Vec::with_capacity(4);
                let mut d1 = pollutant.backward(&mut tape, &g1, &mut first)?;
                d1.add_assign(&d2)?;
                head_grads.push(first);
                head_grads.push(second);
                d1
            }
            Heads::TwoStage {
                pollutant,
                remaining,
            } => {
                let mut second = Vec::with_capacity(4);
                let _stopped = remaining.backward(&mut tape, &g2, &mut second)?;
                let mut first = Vec::with_capacity(4);
                let d1 = pollutant.backward(&mut tape, &g1, &mut first)?;
                head_grads.push(first);
                head_grads.push(second);
                d1
            }
            Heads::Monolithic { combined } => {
                let mut only = Vec::with_capacity(4);
                let d = combined.backward(&mut tape, output_grad, &mut only)?;
                head_grads.push(only);
                d
            }
        };

        let mut upstream = flatten_backward(&mut tape, d_features)?;
        let mut conv_grads = Vec::with_capacity(3);
        for (i, bank) in self.convs.iter().enumerate().rev() {
            let d_act = maxpool2x2_backward(&mut tape, &upstream)?;
            let d_conv = leaky_relu_backward(&mut tape, &d_act)?;
            let grads = conv2d_backward(&mut tape, bank, &d_conv, i > 0)?;
            if let Some(input) = grads.input {
                upstream = input;
            }
            conv_grads.push((grads.weights, grads.bias));
        }
        if !tape.is_empty() {
            return Err(Error::shape("backward", "tape has unconsumed records"));
        }

        let mut tensors = Vec::with_capacity(6 + 4 * head_grads.len());
        for (w, b) in conv_grads.into_iter().rev() {
            tensors.push(w);
            tensors.push(b);
        }
        tensors.extend(head_grads.into_iter().flatten());
        Ok(Gradients { tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(arch: Architecture) -> ModelConfig {
        ModelConfig {
            input_height: 16,
            input_width: 16,
            input_channels: 3,
            conv_filters: [2, 2, 2],
            kernel: 2,
            pool: 2,
            leaky_slope: 0.01,
            hidden_units: 4,
            architecture: arch,
        }
    }

    #[test]
    fn full_size_parameter_count() {
        // conv: 896 + 18496 + 36928; heads: (43264*64 + 64 + 64*2 + 2) + (43264*64 + 64 + 64*5 + 5)
        let m = ModelGraph::<f32>::zeros(ModelConfig::default()).unwrap();
        assert_eq!(m.trunk_parameter_count(), 56_320);
        assert_eq!(m.parameter_count(), 5_594_695);
    }

    #[test]
    fn architectures_share_trunk_size_and_seeded_weights() {
        let models: Vec<_> = Architecture::ALL
            .into_iter()
            .map(|a| ModelGraph::<f32>::build(tiny(a), 5).unwrap())
            .collect();
        for m in &models[1..] {
            assert_eq!(m.trunk_parameter_count(), models[0].trunk_parameter_count());
            assert_eq!(m.convs(), models[0].convs());
        }
        assert_eq!(
            ModelGraph::<f32>::build(tiny(Architecture::Branched), 5).unwrap(),
            models[0]
        );
        assert_ne!(
            ModelGraph::<f32>::build(tiny(Architecture::Branched), 6).unwrap(),
            models[0]
        );
    }

    #[test]
    fn names_align_with_parameters() {
        for a in Architecture::ALL {
            let m = ModelGraph::<f32>::build(tiny(a), 1).unwrap();
            assert_eq!(m.parameter_names().len(), m.parameters().len());
            let g = Gradients::zeros_like(&m);
            assert_eq!(g.tensors.len(), m.parameters().len());
        }
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut m = ModelGraph::<f64>::build(tiny(Architecture::Branched), 1).unwrap();
        let img = Tensor::full(&[16, 16, 3], 0.5);
        let trace = m.forward_traced(&img).unwrap();
        m.parameters_mut()[0].data_mut()[0] += 1.0;
        let err = m.backward(trace, &Tensor::zeros(&[7])).unwrap_err();
        assert!(matches!(err, Error::StaleTrace));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = ModelGraph::<f32>::build(tiny(Architecture::Monolithic), 1).unwrap();
        assert!(m.predict(&Tensor::zeros(&[16, 15, 3])).is_err());
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn predict_matches_traced_forward() {
        for a in Architecture::ALL {
            let m = ModelGraph::<f32>::build(tiny(a), 9).unwrap();
            let img = Tensor::from_fn(&[16, 16, 3], |i| ((i * 31) % 17) as f32 / 17.0);
            assert_eq!(
                m.predict(&img).unwrap(),
                m.forward_traced(&img).unwrap().outputs
            );
        }
    }
}

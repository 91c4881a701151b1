use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::DEFAULT_LEAKY_SLOPE;

/// How the dense heads are wired onto the shared convolutional trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Two heads read the flattened features: 2 pollutants and 5 others.
    Branched,
    /// Image -> 2 pollutants, then a separate MLP maps those 2 to the 5 others.
    TwoStage,
    /// A single 7-output head.
    Monolithic,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Branched,
        Architecture::TwoStage,
        Architecture::Monolithic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Branched => "branched",
            Architecture::TwoStage => "two-stage",
            Architecture::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub conv_filters: [usize; 3],
    pub kernel: usize,
    pub pool: usize,
    pub leaky_slope: f64,
    pub hidden_units: usize,
    pub architecture: Architecture,
}

impl Default for ModelConfig {
    /// 224x224x3 input, 32/64/64 filters of 3x3, 2x2 pooling, 64 hidden units.
    fn default() -> Self {
        Self {
            input_height: 224,
            input_width: 224,
            input_channels: 3,
            conv_filters: [32, 64, 64],
            kernel: 3,
            pool: 2,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            hidden_units: 64,
            architecture: Architecture::Branched,
        }
    }
}

/// Output shapes of one conv -> LeakyReLU -> pool stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StageShape {
    pub conv: [usize; 3],
    pub pooled: [usize; 3],
}

impl ModelConfig {
    /// Reduced desk-scale configuration: `size x size` input, 8/16/16
    /// filters, 32 hidden units.
    pub fn desk(size: usize) -> Self {
        Self {
            input_height: size,
            input_width: size,
            conv_filters: [8, 16, 16],
            hidden_units: 32,
            ..Self::default()
        }
    }

    pub fn with_architecture(mut self, architecture: Architecture) -> Self {
        self.architecture = architecture;
        self
    }

    pub fn stage_shapes(&self) -> Result<[StageShape; 3]> {
        let invalid = |reason: String| Err(Error::InvalidArgument(reason));
        if self.pool != 2 {
            return invalid(format!("only 2x2 pooling is supported, got {}", self.pool));
        }
        if self.kernel == 0 {
            return invalid("kernel size must be positive".into());
        }
        if self.input_channels == 0 || self.hidden_units == 0 || self.conv_filters.contains(&0) {
            return invalid("channel, filter and hidden counts must be positive".into());
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope <= 1.0) {
            return invalid(format!(
                "leaky slope must lie in (0, 1], got {}",
                self.leaky_slope
            ));
        }
        let (mut h, mut w, mut c) = (self.input_height, self.input_width, self.input_channels);
        let mut shapes = [StageShape {
            conv: [0; 3],
            pooled: [0; 3],
        }; 3];
        for (stage, &filters) in shapes.iter_mut().zip(&self.conv_filters) {
            if h < self.kernel || w < self.kernel {
                return invalid(format!(
                    "input {}x{} is too small: a stage receives {h}x{w}, below the {k}x{k} kernel",
                    self.input_height,
                    self.input_width,
                    k = self.kernel
                ));
            }
            let (ch, cw) = (h - self.kernel + 1, w - self.kernel + 1);
            if ch < 2 || cw < 2 {
                return invalid(format!(
                    "input {}x{} is too small: a stage produces {ch}x{cw}, below the 2x2 pool",
                    self.input_height, self.input_width
                ));
            }
            stage.conv = [ch, cw, filters];
            (h, w, c) = (ch / 2, cw / 2, filters);
            stage.pooled = [h, w, c];
        }
        let _ = c;
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage_shapes().map(|_| ())
    }

    pub fn flatten_width(&self) -> Result<usize> {
        let last = self.stage_shapes()?[2].pooled;
        Ok(last.iter().product())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_height, self.input_width, self.input_channels]
    }
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use healthcam_core::dataset::{
    decode_image, image_to_tensor, resize_nearest, AqiClass, AqiTable, LabelScaler,
    PollutantVector, PARAMETER_COUNT,
};
use healthcam_core::model::{Architecture, Checkpoint, ModelConfig};
use healthcam_core::recommendation::{recommend, Recommendation, RuleTable, SymptomProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ApiError;

/// Smallest accepted upload, per side.
pub const MIN_IMAGE_SIDE: u32 = 32;

/// A loaded checkpoint and its content hash. Immutable once built.
#[derive(Debug)]
pub struct Deployment {
    checkpoint: Checkpoint,
    sha256: String,
    source: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub architecture: Architecture,
    pub checkpoint_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Native units, the exact inverse scaling of `raw_outputs`.
    pub pollutants: PollutantVector,
    pub aqi_class: AqiClass,
    pub aqi_label: String,
    /// Normalised head outputs in parameter order.
    pub raw_outputs: [f64; PARAMETER_COUNT],
    pub model: ModelSummary,
    pub latency_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    #[serde(flatten)]
    pub prediction: PredictResponse,
    pub symptoms: String,
    pub recommendation: Recommendation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputContract {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub min_upload_side: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub architecture: Architecture,
    pub checkpoint_sha256: String,
    pub parameter_count: usize,
    pub input: InputContract,
    pub config: ModelConfig,
    pub scaler: LabelScaler,
}

impl Deployment {
    pub fn from_bytes(bytes: &[u8]) -> healthcam_core::Result<Self> {
        let checkpoint = Checkpoint::from_bytes(bytes)?;
        Ok(Self {
            checkpoint,
            sha256: hex::encode(Sha256::digest(bytes)),
            source: None,
        })
    }

    pub fn load(path: &Path) -> healthcam_core::Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut deployment = Self::from_bytes(&bytes)
            .map_err(|e| healthcam_core::Error::Checkpoint(format!("{}: {e}", path.display())))?;
        deployment.source = Some(path.to_path_buf());
        Ok(deployment)
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            architecture: self.checkpoint.model.architecture(),
            checkpoint_sha256: self.sha256.clone(),
        }
    }

    pub fn metadata(&self) -> ModelMetadata {
        let config = self.checkpoint.model.config().clone();
        ModelMetadata {
            architecture: config.architecture,
            checkpoint_sha256: self.sha256.clone(),
            parameter_count: self.checkpoint.model.parameter_count(),
            input: InputContract {
                height: config.input_height,
                width: config.input_width,
                channels: config.input_channels,
                min_upload_side: MIN_IMAGE_SIDE,
            },
            config,
            scaler: self.checkpoint.scaler.clone(),
        }
    }

    /// Decode, resize to the model input, scale by 1/255, one forward pass,
    /// then inverse label scaling.
    pub fn predict_bytes(&self, image: &[u8], aqi: &AqiTable) -> Result<PredictResponse, ApiError> {
        let started = Instant::now();
        let decoded = decode_image(image).map_err(|e| ApiError::undecodable(e.to_string()))?;
        let (w, h) = decoded.dimensions();
        if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
            return Err(ApiError::image_too_small(w, h));
        }
        let config = self.checkpoint.model.config();
        let tensor = resize_nearest(
            &image_to_tensor(&decoded),
            config.input_height,
            config.input_width,
        )
        .map_err(ApiError::internal)?;
        let output = self
            .checkpoint
            .model
            .predict(&tensor)
            .map_err(ApiError::internal)?;
        let mut raw = [0f64; PARAMETER_COUNT];
        for (r, &v) in raw.iter_mut().zip(output.data()) {
            *r = f64::from(v);
        }
        let pollutants = self.checkpoint.scaler.unscale(&raw);
        let aqi_class = if pollutants.pm25.is_finite() {
            aqi.classify(pollutants.pm25.max(0.0))
                .unwrap_or(AqiClass::Severe)
        } else {
            AqiClass::Severe
        };
        Ok(PredictResponse {
            pollutants,
            aqi_class,
            aqi_label: aqi_class.label().to_owned(),
            raw_outputs: raw,
            model: self.summary(),
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn recommend_bytes(
        &self,
        image: &[u8],
        profile: &SymptomProfile,
        rules: &RuleTable,
    ) -> Result<RecommendResponse, ApiError> {
        let prediction = self.predict_bytes(image, &rules.aqi)?;
        let recommendation = recommend(&prediction.pollutants, profile, rules);
        Ok(RecommendResponse {
            prediction,
            symptoms: profile.to_string(),
            recommendation,
        })
    }
}

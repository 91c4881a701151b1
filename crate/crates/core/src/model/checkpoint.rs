//! Binary checkpoint format.
//!
//! Layout: 8-byte magic `HCAMCKPT`, little-endian `u32` format version,
//! little-endian `u64` header length, a JSON header, then every parameter as
//! little-endian `f32` in the order the header lists them.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Architecture, ModelConfig};
use super::graph::ModelGraph;
use crate::dataset::LabelScaler;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HCAMCKPT";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 8 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub architecture: Architecture,
    pub config: ModelConfig,
    pub scaler: LabelScaler,
    pub parameters: Vec<ParameterEntry>,
}

/// A trained model together with the label normalisation it was trained
/// against.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelGraph<f32>,
    pub scaler: LabelScaler,
}

impl Checkpoint {
    pub fn new(model: ModelGraph<f32>, scaler: LabelScaler) -> Self {
        Self { model, scaler }
    }

    fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            architecture: self.model.architecture(),
            config: self.model.config().clone(),
            scaler: self.scaler.clone(),
            parameters: self
                .model
                .parameter_names()
                .into_iter()
                .zip(self.model.parameters())
                .map(|(name, p)| ParameterEntry {
                    name,
                    shape: p.shape().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let count = self.model.parameter_count();
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + 4 * count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.model.parameters() {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Err(Error::Checkpoint(reason));
        if bytes.len() < PREAMBLE || &bytes[..8] != MAGIC {
            return bad("not a checkpoint: missing magic bytes".into());
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return bad(format!(
                "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
            ));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(PREAMBLE))
            .filter(|&end| end <= bytes.len());
        let Some(header_end) = header_end else {
            return bad(format!(
                "header length {header_len} exceeds file size {}",
                bytes.len()
            ));
        };
        let header: CheckpointHeader = serde_json::from_slice(&bytes[PREAMBLE..header_end])
            .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
        if header.format_version != version {
            return bad("header version disagrees with preamble".into());
        }
        if header.config.architecture != header.architecture {
            return bad("header architecture disagrees with its config".into());
        }
        let mut model = ModelGraph::<f32>::zeros(header.config.clone())?;
        let expected: Vec<ParameterEntry> = model
            .parameter_names()
            .into_iter()
            .zip(model.parameters())
            .map(|(name, p)| ParameterEntry {
                name,
                shape: p.shape().to_vec(),
            })
            .collect();
        if expected != header.parameters {
            return bad("parameter list does not match the declared configuration".into());
        }
        let payload = &bytes[header_end..];
        let count = model.parameter_count();
        if payload.len() != 4 * count {
            return bad(format!(
                "expected {} parameter bytes, found {}",
                4 * count,
                payload.len()
            ));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        model.set_flat_parameters(&values)?;
        Ok(Self {
            model,
            scaler: header.scaler,
        })
    }

    /// Writes through a temporary file in the target directory, so readers
    /// never observe a partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load_expecting(path: &Path, architecture: Architecture) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if ckpt.model.architecture() != architecture {
            return Err(Error::ArchitectureMismatch {
                expected: architecture.to_string(),
                found: ckpt.model.architecture().to_string(),
            });
        }
        Ok(ckpt)
    }
}

//! CSV manifests pairing image files with pollutant labels.
//!
//! Header is exactly `path,pm25,pm10,so2,o3,no2,co,aqi`. Relative paths are
//! resolved against the manifest's own directory.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aqi::AqiTable;
use super::pollutant::PollutantVector;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 8] = ["path", "pm25", "pm10", "so2", "o3", "no2", "co", "aqi"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub label: PollutantVector,
}

#[derive(Serialize, Deserialize)]
struct Row {
    path: String,
    pm25: f64,
    pm10: f64,
    so2: f64,
    o3: f64,
    no2: f64,
    co: f64,
    aqi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
    pub source: Source,
    /// Set once the manifest is one side of a train/test partition.
    pub split: Option<Split>,
}

impl DatasetManifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<ManifestRecord>, source: Source) -> Self {
        Self {
            base_dir: base_dir.into(),
            records,
            source,
            split: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.path)
    }

    pub fn read(path: &Path, source: Source) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut reader = csv::Reader::from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::Manifest(format!(
                "{}: header must be `{}`, got `{}`",
                path.display(),
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut records = Vec::new();
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
            let label = PollutantVector::from_array([
                row.pm25, row.pm10, row.so2, row.o3, row.no2, row.co, row.aqi,
            ]);
            label.validate().map_err(|e| {
                Error::Manifest(format!("{} row {}: {e}", path.display(), line + 2))
            })?;
            records.push(ManifestRecord {
                path: PathBuf::from(row.path),
                label,
            });
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::new(base_dir, records, source))
    }

    /// Writes with LF line endings; paths are written as stored.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| Error::Manifest(e.to_string()))?;
        for record in &self.records {
            let [pm25, pm10, so2, o3, no2, co, aqi] = record.label.to_array();
            writer
                .serialize(Row {
                    path: record.path.to_string_lossy().into_owned(),
                    pm25,
                    pm10,
                    so2,
                    o3,
                    no2,
                    co,
                    aqi,
                })
                .map_err(|e| Error::Manifest(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Copy with every path made absolute, for manifests written elsewhere.
    pub fn absolutized(&self) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| {
                let resolved = self.resolve(r);
                let path = std::fs::canonicalize(&resolved).unwrap_or(resolved);
                ManifestRecord {
                    path,
                    label: r.label,
                }
            })
            .collect();
        Self {
            base_dir: PathBuf::new(),
            records,
            source: self.source,
            split: self.split,
        }
    }

    /// Stable grouping of records by the PM2.5 class of their label.
    pub fn group_by_aqi_class(&mut self, table: &AqiTable) -> Result<()> {
        let mut keyed = self
            .records
            .drain(..)
            .map(|r| table.classify(r.label.pm25).map(|c| (c, r)))
            .collect::<Result<Vec<_>>>()?;
        keyed.sort_by_key(|(c, _)| *c);
        self.records = keyed.into_iter().map(|(_, r)| r).collect();
        Ok(())
    }

    fn subset(&self, indices: &[usize], split: Split) -> Self {
        Self {
            base_dir: self.base_dir.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            source: self.source,
            split: Some(split),
        }
    }
}

/// Seeded partition of `0..n` into (train, test) index lists.
/// The train side gets `round(fraction * n)` entries.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let train_len = (fraction * n as f64).round() as usize;
    if train_len == 0 || train_len == n {
        return Err(Error::InvalidArgument(format!(
            "a {fraction} split of {n} records leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(train_len);
    Ok((order, test))
}

pub fn split_train_test(
    manifest: &DatasetManifest,
    fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train, test) = split_indices(manifest.len(), fraction, seed)?;
    Ok((
        manifest.subset(&train, Split::Train),
        manifest.subset(&test, Split::Test),
    ))
}

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::{bail, Context};
use serde::Serialize;

use crate::args::OutArgs;

/// Bad flags or arguments that clap could not catch; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Snapshot written as `run_config.json` next to every run's outputs.
/// Holds no timestamps, so identical flags give identical bytes.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a, H: Serialize> {
    pub subcommand: &'a str,
    pub seed: Option<u64>,
    pub paths: BTreeMap<&'a str, PathBuf>,
    pub hyperparameters: &'a H,
    pub version: &'a str,
}

impl<'a, H: Serialize> RunConfig<'a, H> {
    pub fn new(subcommand: &'a str, seed: Option<u64>, hyperparameters: &'a H) -> Self {
        Self {
            subcommand,
            seed,
            paths: BTreeMap::new(),
            hyperparameters,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn path(mut self, key: &'a str, path: &Path) -> Self {
        self.paths.insert(key, path.to_path_buf());
        self
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_json(&dir.join("run_config.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn default_run_dir(seed: u64) -> PathBuf {
    let stamp: String = humantime::format_rfc3339_seconds(SystemTime::now())
        .to_string()
        .chars()
        .filter(|c| !matches!(c, '-' | ':'))
        .collect();
    PathBuf::from("runs").join(format!("{stamp}-seed{seed}"))
}

/// Resolves the output directory and makes sure it exists and is empty.
/// `--force` removes an existing non-empty directory first.
pub fn prepare_out_dir(out: &OutArgs, seed: u64) -> anyhow::Result<PathBuf> {
    let dir = out.out.clone().unwrap_or_else(|| default_run_dir(seed));
    if dir.is_file() {
        bail!("output path {} is a file", dir.display());
    }
    if dir.is_dir() {
        let occupied = std::fs::read_dir(&dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied {
            if !out.force {
                bail!(
                    "output directory {} is not empty; pass --force to replace it",
                    dir.display()
                );
            }
            std::fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
    }
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

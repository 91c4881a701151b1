use std::path::{Path, PathBuf};

use anyhow::Context;
use healthcam_core::augmentation::augment_dataset;
use healthcam_core::dataset::{
    decode_image, generate_synthetic, image_to_tensor, load_image, tensor_to_image,
    DatasetManifest, LabeledSample, ManifestRecord, Source,
};
use rayon::prelude::*;

use crate::args::{AugmentArgs, SynthArgs};
use crate::run::{prepare_out_dir, RunConfig};

pub fn read_manifest(path: &Path, source: Source) -> anyhow::Result<DatasetManifest> {
    let manifest = DatasetManifest::read(path, source)?;
    if manifest.is_empty() {
        anyhow::bail!("manifest {} has no rows", path.display());
    }
    Ok(manifest)
}

/// Every image of `manifest`, resized to `size`x`size`.
pub fn load_samples(manifest: &DatasetManifest, size: usize) -> anyhow::Result<Vec<LabeledSample>> {
    manifest
        .records
        .par_iter()
        .map(|r| {
            Ok(LabeledSample {
                image: load_image(&manifest.resolve(r), size, size)?,
                label: r.label,
            })
        })
        .collect()
}

fn load_native(manifest: &DatasetManifest) -> anyhow::Result<Vec<LabeledSample>> {
    manifest
        .records
        .par_iter()
        .map(|r| {
            let path = manifest.resolve(r);
            let bytes =
                std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let image =
                decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))?;
            Ok(LabeledSample {
                image: image_to_tensor(&image),
                label: r.label,
            })
        })
        .collect()
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let count = usize::try_from(args.count).context("count too large")?;
    let dir = prepare_out_dir(&args.out, args.seed)?;
    let mut data = generate_synthetic(count, args.seed, args.size)?;
    let manifest = data.save(&dir)?;
    RunConfig::new("synth", Some(args.seed), args)
        .path("out", &dir)
        .path("manifest", &manifest)
        .write(&dir)?;
    tracing::info!("wrote {count} images and {}", manifest.display());
    println!("{}", manifest.display());
    Ok(())
}

pub fn augment(args: &AugmentArgs) -> anyhow::Result<()> {
    let manifest = read_manifest(&args.manifest, args.source.into())?;
    let policy = args.policy.policy(args.seed, args.keep_original);
    let dir = prepare_out_dir(&args.out, args.seed)?;
    let samples = load_native(&manifest)?;
    let derived = augment_dataset(&samples, &policy)?;

    std::fs::create_dir_all(dir.join("images"))?;
    let records: Vec<ManifestRecord> = derived
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let rel = PathBuf::from(format!("images/{i:06}.png"));
            let path = dir.join(&rel);
            tensor_to_image(&s.image)?
                .save(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            Ok(ManifestRecord {
                path: rel,
                label: s.label,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let out_manifest = DatasetManifest::new(dir.clone(), records, manifest.source);
    let manifest_path = dir.join("manifest.csv");
    out_manifest.write(&manifest_path)?;

    RunConfig::new("augment", Some(args.seed), args)
        .path("input_manifest", &args.manifest)
        .path("out", &dir)
        .path("manifest", &manifest_path)
        .write(&dir)?;
    tracing::info!(
        "{} rows -> {} rows ({}x)",
        manifest.len(),
        out_manifest.len(),
        policy.multiplier()
    );
    println!("{}", manifest_path.display());
    Ok(())
}

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use healthcam_core::dataset::{
    split_train_test, DatasetManifest, LabeledSample, Parameter, PARAMETER_COUNT,
};
use healthcam_core::model::{Architecture, Checkpoint, ModelConfig};
use healthcam_core::training::experiments::{
    run_architecture_comparison, run_augmentation_study, train_on, ArmRun, AugmentationArm,
    BenchmarkConfig, BenchmarkData, AUGMENTATION_STUDY_SAMPLES, MIN_SEEDS, PLATEAU_WINDOW,
};
use healthcam_core::training::{evaluate, prepare_examples, AdamConfig, Metrics, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    ArchitectureStudyArgs, AugmentationStudyArgs, BenchmarkArgs, EvalArgs, ModelArgs, OptimArgs,
    TrainArgs,
};
use crate::data::{load_samples, read_manifest};
use crate::run::{prepare_out_dir, usage, write_json, RunConfig};

fn model_config(args: &ModelArgs, architecture: Architecture) -> anyhow::Result<ModelConfig> {
    let config = ModelConfig {
        input_height: args.input_size,
        input_width: args.input_size,
        conv_filters: args.filters,
        hidden_units: usize::try_from(args.hidden)?,
        architecture,
        ..ModelConfig::default()
    };
    config
        .flatten_width()
        .map_err(|e| usage(format!("model configuration rejected: {e}")))?;
    Ok(config)
}

fn train_config(args: &OptimArgs, seed: u64) -> anyhow::Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: args.epochs,
        batch_size: usize::try_from(args.batch_size)?,
        seed,
        adam: AdamConfig {
            learning_rate: args.learning_rate,
            ..AdamConfig::default()
        },
    })
}

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let architecture = Architecture::from(args.arch);
    let config = model_config(&args.model, architecture)?;
    let train_config = train_config(&args.optim, args.seed)?;
    let source = args.source.into();
    let manifest = read_manifest(&args.manifest, source)?;
    let (train_manifest, test_manifest) = match &args.test_manifest {
        Some(path) => (manifest, read_manifest(path, source)?),
        None => split_train_test(&manifest, args.train_fraction, args.seed)
            .map_err(|e| usage(e.to_string()))?,
    };
    let dir = prepare_out_dir(&args.out, args.seed)?;

    let size = config.input_height;
    let data = BenchmarkData::from_split(
        args.seed,
        load_samples(&train_manifest, size)?,
        load_samples(&test_manifest, size)?,
    )?;
    tracing::info!(
        "training {} on {} images, testing on {}",
        architecture.name(),
        data.train.len(),
        data.test.len()
    );
    let trained = train_on(&data, &config, None, &train_config)?;

    let checkpoint_path = dir.join("model.ckpt");
    Checkpoint::new(trained.model, data.scaler.clone()).save(&checkpoint_path)?;
    trained.report.save_json(&dir.join("report.json"))?;
    trained
        .report
        .save_curves(&dir.join("curves.csv"), architecture.name())?;
    data.scaler.save(&dir.join("scaler.json"))?;
    train_manifest
        .absolutized()
        .write(&dir.join("train_manifest.csv"))?;
    test_manifest
        .absolutized()
        .write(&dir.join("test_manifest.csv"))?;
    RunConfig::new("train", Some(args.seed), args)
        .path("manifest", &args.manifest)
        .path("out", &dir)
        .path("checkpoint", &checkpoint_path)
        .write(&dir)?;

    let r = &trained.report;
    println!(
        "{}: train mse {:.6} mae {:.6} | test mse {:.6} mae {:.6} | baseline mse {:.6} | {:.1}s",
        architecture.name(),
        r.final_train.mse,
        r.final_train.mae,
        r.final_test.mse,
        r.final_test.mae,
        r.baseline_test.mse,
        r.wall_time_secs
    );
    println!("{}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ParameterError {
    parameter: &'static str,
    unit: &'static str,
    mae: f64,
    mse: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    checkpoint: String,
    manifest: String,
    architecture: Architecture,
    samples: usize,
    normalized: Metrics,
    native: Vec<ParameterError>,
}

fn native_errors(
    checkpoint: &Checkpoint,
    samples: &[LabeledSample],
) -> anyhow::Result<Vec<ParameterError>> {
    let sums = samples
        .par_iter()
        .map(|s| {
            let out = checkpoint.model.predict(&s.image)?;
            let raw: [f64; PARAMETER_COUNT] = std::array::from_fn(|i| f64::from(out.data()[i]));
            let pred = checkpoint.scaler.unscale(&raw).to_array();
            let truth = s.label.to_array();
            let mut acc = [[0f64; 2]; PARAMETER_COUNT];
            for i in 0..PARAMETER_COUNT {
                let d = pred[i] - truth[i];
                acc[i] = [d.abs(), d * d];
            }
            Ok(acc)
        })
        .collect::<healthcam_core::Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    Ok(Parameter::ALL
        .iter()
        .map(|&p| {
            let (mae, mse) = sums.iter().fold((0.0, 0.0), |(a, s), acc| {
                (a + acc[p.index()][0], s + acc[p.index()][1])
            });
            ParameterError {
                parameter: p.name(),
                unit: p.unit(),
                mae: mae / n,
                mse: mse / n,
            }
        })
        .collect())
}

fn render_eval(report: &EvalReport) -> String {
    let m = &report.normalized;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} model on {} images (normalised units)",
        report.architecture.name(),
        report.samples
    );
    let _ = writeln!(
        out,
        "{:<6}{:>14}{:>14}{:>14}",
        "", "pm2.5+pm10", "remaining", "all"
    );
    let _ = writeln!(
        out,
        "{:<6}{:>14.6}{:>14.6}{:>14.6}",
        "MAE", m.pollutant_mae, m.remaining_mae, m.mae
    );
    let _ = writeln!(
        out,
        "{:<6}{:>14.6}{:>14.6}{:>14.6}",
        "MSE", m.pollutant_mse, m.remaining_mse, m.mse
    );
    let _ = writeln!(out, "\nnative units");
    let _ = write!(out, "{:<6}", "");
    for e in &report.native {
        let _ = write!(out, "{:>14}", format!("{} ({})", e.parameter, e.unit));
    }
    let mae = |e: &ParameterError| e.mae;
    let mse = |e: &ParameterError| e.mse;
    for (label, pick) in [
        ("MAE", &mae as &dyn Fn(&ParameterError) -> f64),
        ("MSE", &mse),
    ] {
        let _ = write!(out, "\n{label:<6}");
        for e in &report.native {
            let _ = write!(out, "{:>14.4}", pick(e));
        }
    }
    out.push('\n');
    out
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let manifest: DatasetManifest = read_manifest(&args.manifest, args.source.into())?;
    let config = checkpoint.model.config().clone();
    if config.input_height != config.input_width {
        anyhow::bail!("non-square model input is not supported by eval");
    }
    let samples = load_samples(&manifest, config.input_height)?;
    let examples = prepare_examples(&samples, &checkpoint.scaler, &config)?;
    let normalized = evaluate(&checkpoint.model, &examples)?;
    let native = native_errors(&checkpoint, &samples)?;
    let report = EvalReport {
        checkpoint: args.checkpoint.display().to_string(),
        manifest: args.manifest.display().to_string(),
        architecture: config.architecture,
        samples: samples.len(),
        normalized,
        native,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_eval(&report));
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("metrics.json"), &report)?;
        RunConfig::new("eval", None, &serde_json::json!({ "json": args.json }))
            .path("manifest", &args.manifest)
            .path("checkpoint", &args.checkpoint)
            .path("out", dir)
            .write(dir)?;
    }
    Ok(())
}

fn benchmark(args: &BenchmarkArgs, default_samples: usize) -> anyhow::Result<BenchmarkConfig> {
    if args.seeds.len() < MIN_SEEDS {
        return Err(usage(format!(
            "at least {MIN_SEEDS} seeds are required, got {}",
            args.seeds.len()
        )));
    }
    if args
        .seeds
        .iter()
        .enumerate()
        .any(|(i, s)| args.seeds[..i].contains(s))
    {
        return Err(usage("seeds must be distinct"));
    }
    let model = model_config(
        &ModelArgs {
            input_size: args.image_size as usize,
            filters: args.filters,
            hidden: args.hidden,
        },
        Architecture::Branched,
    )?;
    Ok(BenchmarkConfig {
        samples: args.samples.unwrap_or(default_samples),
        image_size: args.image_size as usize,
        train_fraction: args.train_fraction,
        model,
        train: train_config(&args.optim, 0)?,
    })
}

fn check_distinct<T: PartialEq>(items: &[T], what: &str) -> anyhow::Result<()> {
    if items.is_empty() {
        return Err(usage(format!("at least one {what} is required")));
    }
    if items
        .iter()
        .enumerate()
        .any(|(i, a)| items[..i].contains(a))
    {
        return Err(usage(format!("{what}s must be distinct")));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    arm: &'a str,
    seed: u64,
    plateau_mae: Option<f64>,
    final_train: Metrics,
    final_test: Metrics,
    original_test: Metrics,
    baseline_test: Metrics,
    wall_time_secs: f64,
}

impl<'a> From<&'a ArmRun> for RunSummary<'a> {
    fn from(r: &'a ArmRun) -> Self {
        Self {
            arm: &r.arm,
            seed: r.seed,
            plateau_mae: r.report.plateau_mae(PLATEAU_WINDOW),
            final_train: r.report.final_train,
            final_test: r.report.final_test,
            original_test: r.original_test,
            baseline_test: r.report.baseline_test,
            wall_time_secs: r.report.wall_time_secs,
        }
    }
}

fn write_arm(dir: &Path, run: &ArmRun) -> anyhow::Result<()> {
    let arm_dir = dir.join(&run.arm).join(format!("seed-{}", run.seed));
    std::fs::create_dir_all(&arm_dir)?;
    run.report
        .save_curves(&arm_dir.join("curves.csv"), &run.arm)?;
    run.report.save_json(&arm_dir.join("report.json"))?;
    tracing::info!(
        "{} seed {}: test mae {:.4} mse {:.4} ({:.1}s)",
        run.arm,
        run.seed,
        run.report.final_test.mae,
        run.report.final_test.mse,
        run.report.wall_time_secs
    );
    Ok(())
}

pub fn study_augmentation(args: &AugmentationStudyArgs) -> anyhow::Result<()> {
    let config = benchmark(&args.bench, AUGMENTATION_STUDY_SAMPLES)?;
    check_distinct(&args.arms, "arm")?;
    let arms: Vec<AugmentationArm> = args.arms.iter().map(|&a| a.into()).collect();
    let dir = prepare_out_dir(&args.bench.out, args.bench.seeds[0])?;
    RunConfig::new("study augmentation", None, args)
        .path("out", &dir)
        .write(&dir)?;

    let mut write_error = None;
    let study = run_augmentation_study(&config, &arms, &args.bench.seeds, |run| {
        if let Err(e) = write_arm(&dir, run) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let summary = serde_json::json!({
        "study": "augmentation",
        "benchmark": study.benchmark,
        "plateau_window": study.plateau_window,
        "seeds": study.seeds,
        "runs": study.runs.iter().map(RunSummary::from).collect::<Vec<_>>(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    let text = study.render();
    std::fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    println!("{}", dir.display());
    Ok(())
}

pub fn study_architecture(args: &ArchitectureStudyArgs) -> anyhow::Result<()> {
    let config = benchmark(&args.bench, BenchmarkConfig::desk().samples)?;
    check_distinct(&args.archs, "architecture")?;
    let archs: Vec<Architecture> = args.archs.iter().map(|&a| a.into()).collect();
    let dir = prepare_out_dir(&args.bench.out, args.bench.seeds[0])?;
    RunConfig::new("study architecture", None, args)
        .path("out", &dir)
        .write(&dir)?;

    let mut write_error = None;
    let comparison = run_architecture_comparison(&config, &archs, &args.bench.seeds, |run| {
        if let Err(e) = write_arm(&dir, run) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let medians: Vec<_> = archs
        .iter()
        .map(|&a| {
            serde_json::json!({
                "architecture": a,
                "median_mse": comparison.median_metric(a, |m| m.mse),
                "median_pollutant_mse": comparison.median_metric(a, |m| m.pollutant_mse),
                "median_remaining_mse": comparison.median_metric(a, |m| m.remaining_mse),
                "median_remaining_mae": comparison.median_metric(a, |m| m.remaining_mae),
            })
        })
        .collect();
    let summary = serde_json::json!({
        "study": "architecture",
        "benchmark": comparison.benchmark,
        "seeds": comparison.seeds,
        "medians": medians,
        "runs": comparison.runs.iter().map(RunSummary::from).collect::<Vec<_>>(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    let text = comparison.render_tables();
    std::fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    println!("{}", dir.display());
    Ok(())
}

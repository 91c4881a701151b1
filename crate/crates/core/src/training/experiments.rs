//! Multi-seed experiments on the synthetic haze benchmark: augmentation
//! parity and architecture comparison.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::trainer::{evaluate, prepare_examples, train, Metrics, TrainConfig, TrainReport};
use crate::augmentation::{augment_dataset, AugmentationPolicy};
use crate::dataset::{
    generate_synthetic, image_to_tensor, split_indices, LabelScaler, LabeledSample,
};
use crate::error::{Error, Result};
use crate::model::{Architecture, ModelConfig, ModelGraph};

pub const PLATEAU_WINDOW: usize = 5;
pub const MIN_SEEDS: usize = 3;
/// Base-set size for the augmentation study. Its arms train on 4x and 8x
/// this many images.
pub const AUGMENTATION_STUDY_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub samples: usize,
    pub image_size: usize,
    pub train_fraction: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl BenchmarkConfig {
    /// 500 synthetic images at 64x64 with the reduced model, 50 epochs.
    pub fn desk() -> Self {
        Self {
            samples: 500,
            image_size: 64,
            train_fraction: 0.8,
            model: ModelConfig::desk(64),
            train: TrainConfig::default(),
        }
    }

    /// [`BenchmarkConfig::desk`] on the smaller augmentation-study base set.
    pub fn augmentation_desk() -> Self {
        Self {
            samples: AUGMENTATION_STUDY_SAMPLES,
            ..Self::desk()
        }
    }
}

/// A seeded train/test split with a scaler fitted on the train side only.
#[derive(Clone, Debug)]
pub struct BenchmarkData {
    pub seed: u64,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub scaler: LabelScaler,
}

impl BenchmarkData {
    pub fn from_split(
        seed: u64,
        train: Vec<LabeledSample>,
        test: Vec<LabeledSample>,
    ) -> Result<Self> {
        let scaler = LabelScaler::fit(train.iter().map(|s| &s.label))?;
        Ok(Self {
            seed,
            train,
            test,
            scaler,
        })
    }
}

pub fn synthetic_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<BenchmarkData> {
    let size = u32::try_from(config.image_size).map_err(|_| {
        Error::InvalidArgument(format!("image size {} too large", config.image_size))
    })?;
    let data = generate_synthetic(config.samples, seed, size)?;
    let samples: Vec<LabeledSample> = data
        .samples
        .iter()
        .map(|s| LabeledSample {
            image: image_to_tensor(&s.image),
            label: s.label,
        })
        .collect();
    let (train_idx, test_idx) = split_indices(samples.len(), config.train_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    BenchmarkData::from_split(seed, pick(&train_idx), pick(&test_idx))
}

/// Trains one freshly initialised model (seeded by `train.seed`).
///
/// With a policy, the training split and the held-out split are both
/// augmented after splitting, so per-epoch test metrics are measured on the
/// arm's own input distribution. The un-augmented held-out images are
/// always scored once more at the end.
pub fn train_on(
    data: &BenchmarkData,
    model_config: &ModelConfig,
    policy: Option<&AugmentationPolicy>,
    train_config: &TrainConfig,
) -> Result<TrainedArm> {
    let original_test = prepare_examples(&data.test, &data.scaler, model_config)?;
    let (train_set, test_set) = match policy {
        Some(p) => (
            prepare_examples(
                &augment_dataset(&data.train, p)?,
                &data.scaler,
                model_config,
            )?,
            prepare_examples(&augment_dataset(&data.test, p)?, &data.scaler, model_config)?,
        ),
        None => (
            prepare_examples(&data.train, &data.scaler, model_config)?,
            original_test.clone(),
        ),
    };
    let mut model = ModelGraph::build(model_config.clone(), train_config.seed)?;
    let report = train(&mut model, &train_set, &test_set, train_config)?;
    let original_test = evaluate(&model, &original_test)?;
    Ok(TrainedArm {
        model,
        report,
        original_test,
    })
}

pub struct TrainedArm {
    pub model: ModelGraph<f32>,
    pub report: TrainReport,
    /// Final metrics on the un-augmented held-out images.
    pub original_test: Metrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentationArm {
    None,
    Vertical,
    VerticalHorizontal,
}

impl AugmentationArm {
    pub const ALL: [AugmentationArm; 3] = [
        AugmentationArm::None,
        AugmentationArm::Vertical,
        AugmentationArm::VerticalHorizontal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentationArm::None => "none",
            AugmentationArm::Vertical => "vertical",
            AugmentationArm::VerticalHorizontal => "vertical-horizontal",
        }
    }

    pub fn policy(self, seed: u64) -> Option<AugmentationPolicy> {
        match self {
            AugmentationArm::None => None,
            AugmentationArm::Vertical => Some(AugmentationPolicy::vertical(seed)),
            AugmentationArm::VerticalHorizontal => {
                Some(AugmentationPolicy::vertical_horizontal(seed))
            }
        }
    }
}

impl fmt::Display for AugmentationArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationArm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentationArm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown augmentation arm `{s}`")))
    }
}

/// One trained arm of an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmRun {
    pub arm: String,
    pub seed: u64,
    pub report: TrainReport,
    pub original_test: Metrics,
}

/// Plateau tolerance around a reference plateau: 0.01 absolute or 20% of
/// the reference, whichever is larger.
pub fn parity_tolerance(reference: f64) -> f64 {
    f64::max(0.01, 0.2 * reference.abs())
}

pub fn within_parity(reference: f64, other: f64) -> bool {
    (reference - other).abs() < parity_tolerance(reference)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AugmentationSeedSummary {
    pub seed: u64,
    pub plateau_mae: Vec<(String, f64)>,
    /// `|plateau(none) - plateau(vertical)|`
    pub none_vs_vertical: Option<f64>,
    /// `|plateau(vertical) - plateau(vertical-horizontal)|`
    pub vertical_vs_vertical_horizontal: Option<f64>,
    pub none_vs_vertical_within_parity: Option<bool>,
    pub horizontal_within_parity: Option<bool>,
    /// Final MAE of each arm on the un-augmented held-out images.
    pub original_test_mae: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AugmentationStudy {
    pub benchmark: BenchmarkConfig,
    pub plateau_window: usize,
    pub runs: Vec<ArmRun>,
    pub seeds: Vec<AugmentationSeedSummary>,
}

fn check_experiment(seeds: &[u64], arms: usize) -> Result<()> {
    if seeds.len() < MIN_SEEDS {
        return Err(Error::InvalidArgument(format!(
            "experiments need at least {MIN_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(Error::InvalidArgument(
            "experiment seeds must be distinct".into(),
        ));
    }
    if arms == 0 {
        return Err(Error::InvalidArgument(
            "experiment needs at least one arm".into(),
        ));
    }
    Ok(())
}

fn check_arms<T: PartialEq + Copy>(arms: &[T]) -> Result<()> {
    for (i, a) in arms.iter().enumerate() {
        if arms[..i].contains(a) {
            return Err(Error::InvalidArgument(
                "experiment arms must be distinct".into(),
            ));
        }
    }
    Ok(())
}

/// Trains every arm for every seed. Within a seed all arms share the data
/// split, model initialisation and shuffle seed. `on_run` sees each run as
/// it finishes.
pub fn run_augmentation_study(
    config: &BenchmarkConfig,
    arms: &[AugmentationArm],
    seeds: &[u64],
    mut on_run: impl FnMut(&ArmRun),
) -> Result<AugmentationStudy> {
    check_experiment(seeds, arms.len())?;
    check_arms(arms)?;
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for &seed in seeds {
        let data = synthetic_benchmark(config, seed)?;
        let train_config = TrainConfig {
            seed,
            ..config.train
        };
        let mut plateaus = Vec::new();
        let mut original = Vec::new();
        for &arm in arms {
            let policy = arm.policy(seed);
            let trained = train_on(&data, &config.model, policy.as_ref(), &train_config)?;
            let run = ArmRun {
                arm: arm.name().to_owned(),
                seed,
                report: trained.report,
                original_test: trained.original_test,
            };
            on_run(&run);
            original.push((arm.name().to_owned(), run.original_test.mae));
            if let Some(p) = run.report.plateau_mae(PLATEAU_WINDOW) {
                plateaus.push((arm, p));
            }
            runs.push(run);
        }
        let plateau = |a: AugmentationArm| plateaus.iter().find(|(x, _)| *x == a).map(|(_, p)| *p);
        let pair = |a, b| Some((plateau(a)?, plateau(b)?));
        let none_vertical = pair(AugmentationArm::None, AugmentationArm::Vertical);
        let vertical_vh = pair(
            AugmentationArm::Vertical,
            AugmentationArm::VerticalHorizontal,
        );
        summaries.push(AugmentationSeedSummary {
            seed,
            plateau_mae: plateaus
                .iter()
                .map(|(a, p)| (a.name().to_owned(), *p))
                .collect(),
            none_vs_vertical: none_vertical.map(|(a, b)| (a - b).abs()),
            vertical_vs_vertical_horizontal: vertical_vh.map(|(a, b)| (a - b).abs()),
            none_vs_vertical_within_parity: none_vertical.map(|(a, b)| within_parity(a, b)),
            horizontal_within_parity: vertical_vh.map(|(a, b)| within_parity(a, b)),
            original_test_mae: original,
        });
    }
    Ok(AugmentationStudy {
        benchmark: config.clone(),
        plateau_window: PLATEAU_WINDOW,
        runs,
        seeds: summaries,
    })
}

impl AugmentationStudy {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "plateau held-out MAE (mean of last {} epochs, normalised, held-out split under each arm's policy)",
            self.plateau_window
        );
        for s in &self.seeds {
            let arms: Vec<String> = s
                .plateau_mae
                .iter()
                .map(|(a, p)| format!("{a}={p:.4}"))
                .collect();
            let _ = writeln!(
                out,
                "seed {:>4}: {}  |none-vertical|={}  |vertical-vh|={}",
                s.seed,
                arms.join("  "),
                fmt_opt(s.none_vs_vertical),
                fmt_opt(s.vertical_vs_vertical_horizontal)
            );
            let full: Vec<String> = s
                .original_test_mae
                .iter()
                .map(|(a, m)| format!("{a}={m:.4}"))
                .collect();
            let _ = writeln!(
                out,
                "           final MAE on un-augmented test images: {}",
                full.join("  ")
            );
        }
        out
    }
}

/// Published normalised errors per data source, for context next to the
/// synthetic results.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceRow {
    pub title: &'static str,
    pub mae: [f64; 3],
    pub mse: [f64; 3],
}

pub const REFERENCE_SOURCES: [&str; 3] = ["Bengaluru", "Delhi", "Tamil Nadu"];

pub const REFERENCE_TWO_STAGE: ReferenceRow = ReferenceRow {
    title: "five parameters from two predicted pollutants (two-stage)",
    mae: [0.1812, 0.2787, 0.2521],
    mse: [0.0570, 0.1135, 0.0981],
};

pub const REFERENCE_BRANCHED_POLLUTANTS: ReferenceRow = ReferenceRow {
    title: "two pollutants from images (branched)",
    mae: [0.0951, 0.0559, 0.0851],
    mse: [0.0189, 0.0077, 0.0208],
};

pub const REFERENCE_BRANCHED_REMAINING: ReferenceRow = ReferenceRow {
    title: "five parameters from images (branched)",
    mae: [0.1289, 0.0671, 0.0946],
    mse: [0.0295, 0.0112, 0.0226],
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchitectureSeedSummary {
    pub seed: u64,
    pub final_test: Vec<(Architecture, Metrics)>,
    /// Sign of `MSE(two-stage) - MSE(branched)` on the five-parameter head.
    pub two_stage_minus_branched_sign: Option<i8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchitectureComparison {
    pub benchmark: BenchmarkConfig,
    pub runs: Vec<ArmRun>,
    pub seeds: Vec<ArchitectureSeedSummary>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn run_architecture_comparison(
    config: &BenchmarkConfig,
    architectures: &[Architecture],
    seeds: &[u64],
    mut on_run: impl FnMut(&ArmRun),
) -> Result<ArchitectureComparison> {
    check_experiment(seeds, architectures.len())?;
    check_arms(architectures)?;
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for &seed in seeds {
        let data = synthetic_benchmark(config, seed)?;
        let train_config = TrainConfig {
            seed,
            ..config.train
        };
        let mut finals = Vec::new();
        for &arch in architectures {
            let model_config = config.model.clone().with_architecture(arch);
            let trained = train_on(&data, &model_config, None, &train_config)?;
            let run = ArmRun {
                arm: arch.name().to_owned(),
                seed,
                report: trained.report,
                original_test: trained.original_test,
            };
            on_run(&run);
            finals.push((arch, run.report.final_test));
            runs.push(run);
        }
        let remaining = |a: Architecture| {
            finals
                .iter()
                .find(|(x, _)| *x == a)
                .map(|(_, m)| m.remaining_mse)
        };
        let sign = remaining(Architecture::TwoStage)
            .zip(remaining(Architecture::Branched))
            .map(|(t, b)| match t.total_cmp(&b) {
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            });
        summaries.push(ArchitectureSeedSummary {
            seed,
            final_test: finals,
            two_stage_minus_branched_sign: sign,
        });
    }
    Ok(ArchitectureComparison {
        benchmark: config.clone(),
        runs,
        seeds: summaries,
    })
}

/// Architecture, reference row, title and the (MAE, MSE) pair it reports.
type TableSpec = (
    Architecture,
    Option<ReferenceRow>,
    &'static str,
    fn(&Metrics) -> (f64, f64),
);

impl ArchitectureComparison {
    pub fn runs_for(&self, architecture: Architecture) -> impl Iterator<Item = &ArmRun> {
        self.runs
            .iter()
            .filter(move |r| r.arm == architecture.name())
    }

    /// Median over seeds of a final test metric.
    pub fn median_metric(
        &self,
        architecture: Architecture,
        pick: impl Fn(&Metrics) -> f64,
    ) -> Option<f64> {
        let mut values: Vec<f64> = self
            .runs_for(architecture)
            .map(|r| pick(&r.report.final_test))
            .collect();
        median(&mut values)
    }

    /// MAE and MSE rows with one synthetic column followed by the published
    /// reference columns.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let tables: [TableSpec; 4] = [
            (
                Architecture::Branched,
                Some(REFERENCE_BRANCHED_POLLUTANTS),
                REFERENCE_BRANCHED_POLLUTANTS.title,
                |m| (m.pollutant_mae, m.pollutant_mse),
            ),
            (
                Architecture::Branched,
                Some(REFERENCE_BRANCHED_REMAINING),
                REFERENCE_BRANCHED_REMAINING.title,
                |m| (m.remaining_mae, m.remaining_mse),
            ),
            (
                Architecture::TwoStage,
                Some(REFERENCE_TWO_STAGE),
                REFERENCE_TWO_STAGE.title,
                |m| (m.remaining_mae, m.remaining_mse),
            ),
            (
                Architecture::Monolithic,
                None,
                "seven parameters from images (monolithic)",
                |m| (m.mae, m.mse),
            ),
        ];
        for (arch, reference, title, pick) in tables {
            let Some(mae) = self.median_metric(arch, |m| pick(m).0) else {
                continue;
            };
            let mse = self.median_metric(arch, |m| pick(m).1).unwrap_or(f64::NAN);
            let seeds = self.runs_for(arch).count();
            let _ = writeln!(out, "{title}; synthetic = median over {seeds} seeds");
            let _ = write!(out, "{:<6}{:>12}", "", "Synthetic");
            if reference.is_some() {
                for s in REFERENCE_SOURCES {
                    let _ = write!(out, "{:>13}", format!("{s}*"));
                }
            }
            out.push('\n');
            for (label, ours, refs) in [
                ("MAE", mae, reference.map(|r| r.mae)),
                ("MSE", mse, reference.map(|r| r.mse)),
            ] {
                let _ = write!(out, "{label:<6}{ours:>12.4}");
                for v in refs.into_iter().flatten() {
                    let _ = write!(out, "{v:>13.4}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str("* published reference values on real imagery, not recomputed here\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchmarkConfig {
        BenchmarkConfig {
            samples: 10,
            image_size: 16,
            train_fraction: 0.8,
            model: ModelConfig {
                input_height: 16,
                input_width: 16,
                conv_filters: [2, 2, 2],
                kernel: 2,
                hidden_units: 4,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                epochs: 2,
                batch_size: 4,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn scaler_sees_only_training_labels() {
        let data = synthetic_benchmark(&tiny(), 3).unwrap();
        assert_eq!((data.train.len(), data.test.len()), (8, 2));
        let refit = LabelScaler::fit(data.train.iter().map(|s| &s.label)).unwrap();
        assert_eq!(data.scaler, refit);
    }

    #[test]
    fn augmentation_study_covers_every_arm_and_seed() {
        let mut seen = 0;
        let study =
            run_augmentation_study(&tiny(), &AugmentationArm::ALL, &[1, 2, 3], |_| seen += 1)
                .unwrap();
        assert_eq!(seen, 9);
        assert_eq!(study.runs.len(), 9);
        assert!(study.runs.iter().all(|r| r.report.epochs.len() == 2));
        let vertical = study.runs.iter().find(|r| r.arm == "vertical").unwrap();
        assert_eq!(
            (vertical.report.train_size, vertical.report.test_size),
            (32, 8)
        );
        for s in &study.seeds {
            assert!(s.none_vs_vertical.is_some() && s.vertical_vs_vertical_horizontal.is_some());
        }
        assert!(study.render().contains("|none-vertical|"));
    }

    #[test]
    fn experiments_need_three_distinct_seeds_and_distinct_arms() {
        assert!(run_augmentation_study(&tiny(), &AugmentationArm::ALL, &[1, 2], |_| ()).is_err());
        assert!(
            run_architecture_comparison(&tiny(), &Architecture::ALL, &[1, 1, 2], |_| ()).is_err()
        );
        let twice = [Architecture::Branched, Architecture::Branched];
        assert!(run_architecture_comparison(&tiny(), &twice, &[1, 2, 3], |_| ()).is_err());
    }

    #[test]
    fn comparison_table_has_mae_and_mse_rows() {
        let cmp =
            run_architecture_comparison(&tiny(), &Architecture::ALL, &[1, 2, 3], |_| ()).unwrap();
        assert_eq!(cmp.runs.len(), 9);
        assert!(cmp
            .seeds
            .iter()
            .all(|s| s.two_stage_minus_branched_sign.is_some()));
        let table = cmp.render_tables();
        assert!(table.contains("MAE") && table.contains("MSE") && table.contains("Delhi*"));
        assert!(table.contains("0.0077") && table.contains("0.0112") && table.contains("0.1135"));
    }

    #[test]
    fn parity_tolerance_floor_and_relative() {
        assert_eq!(parity_tolerance(0.01), 0.01);
        assert!((parity_tolerance(0.2) - 0.04).abs() < 1e-12);
        assert!(within_parity(0.2, 0.23));
        assert!(!within_parity(0.2, 0.25));
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn arm_names_round_trip() {
        for a in AugmentationArm::ALL {
            assert_eq!(a.name().parse::<AugmentationArm>().unwrap(), a);
        }
        assert!("diagonal".parse::<AugmentationArm>().is_err());
    }
}

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use healthcam_core::augmentation::AugmentationPolicy;
use healthcam_core::dataset::Source;
use healthcam_core::model::Architecture;
use healthcam_core::training::experiments::AugmentationArm;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "healthcam",
    version,
    about = "Estimate air pollutants from outdoor photos"
)]
pub struct Cli {
    /// Debug-level logging (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic haze dataset: PNG images plus manifest.csv.
    Synth(SynthArgs),
    /// Write the augmented image set of a manifest.
    Augment(AugmentArgs),
    /// Train a model and write checkpoint, report.json and curves.csv.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Run a multi-seed experiment on the synthetic benchmark.
    Study {
        #[command(subcommand)]
        kind: StudyKind,
    },
    /// Predict pollutants for one image; prints the service's JSON with --json.
    Predict(PredictArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum StudyKind {
    /// Plateau MAE of the original, vertical and vertical+horizontal arms.
    Augmentation(AugmentationStudyArgs),
    /// Branched vs two-stage vs monolithic final test errors.
    Architecture(ArchitectureStudyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchArg {
    Branched,
    TwoStage,
    Monolithic,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Branched => Architecture::Branched,
            ArchArg::TwoStage => Architecture::TwoStage,
            ArchArg::Monolithic => Architecture::Monolithic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    /// Halves and their mirrors (4x).
    Vertical,
    /// The vertical set plus horizontal reflections (8x).
    VerticalHorizontal,
    /// One horizontal reflection per image.
    Horizontal,
}

impl PolicyArg {
    pub fn policy(self, seed: u64, keep_original: bool) -> AugmentationPolicy {
        let base = match self {
            Self::Vertical => AugmentationPolicy::vertical(seed),
            Self::VerticalHorizontal => AugmentationPolicy::vertical_horizontal(seed),
            Self::Horizontal => AugmentationPolicy {
                enable_vertical: false,
                enable_horizontal: true,
                ..AugmentationPolicy::vertical(seed)
            },
        };
        AugmentationPolicy {
            keep_original,
            ..base
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmArg {
    None,
    Vertical,
    VerticalHorizontal,
}

impl From<ArmArg> for AugmentationArm {
    fn from(a: ArmArg) -> Self {
        match a {
            ArmArg::None => AugmentationArm::None,
            ArmArg::Vertical => AugmentationArm::Vertical,
            ArmArg::VerticalHorizontal => AugmentationArm::VerticalHorizontal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceArg {
    Real,
    Synthetic,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Real => Source::Real,
            SourceArg::Synthetic => Source::Synthetic,
        }
    }
}

fn parse_filters(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let filters: [usize; 3] = parts.try_into().map_err(|v: Vec<usize>| {
        format!("expected three comma-separated counts, got {}", v.len())
    })?;
    if filters.contains(&0) {
        return Err("filter counts must be positive".into());
    }
    Ok(filters)
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {v}"))
    }
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {v}"))
    }
}

/// Output directory handling shared by every writing subcommand.
#[derive(Clone, Debug, Args, Serialize)]
pub struct OutArgs {
    /// Output directory [default: runs/<UTC timestamp>-seed<seed>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Number of images.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side length of the square images.
    #[arg(long, default_value_t = 224, value_parser = clap::value_parser!(u32).range(8..))]
    pub size: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    /// Also emit each original image.
    #[arg(long)]
    pub keep_original: bool,
    /// Shuffle seed for the derived set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "real")]
    pub source: SourceArg,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Network shape; defaults are the full-size model.
#[derive(Clone, Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Square input side the images are resized to.
    #[arg(long, default_value_t = 224)]
    pub input_size: usize,
    /// Filters of the three conv stages.
    #[arg(long, default_value = "32,64,64", value_parser = parse_filters)]
    pub filters: [usize; 3],
    /// Hidden units of each dense head.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: u64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct OptimArgs {
    /// Passes over the training set.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Examples per Adam step.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    /// Adam step size.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive_f64)]
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Held-out manifest; without it the manifest is split by --train-fraction.
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value = "branched")]
    pub arch: ArchArg,
    /// Drives the split, initialisation and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "real")]
    pub source: SourceArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Print metrics as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_enum, default_value = "real")]
    pub source: SourceArg,
    /// Also write metrics.json and run_config.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Synthetic benchmark shared by both studies.
#[derive(Clone, Debug, Args, Serialize)]
pub struct BenchmarkArgs {
    /// Comma-separated seeds, at least three.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    /// Synthetic images per seed before the split.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(8..))]
    pub image_size: u32,
    #[arg(long, default_value_t = 0.8, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value = "8,16,16", value_parser = parse_filters)]
    pub filters: [usize; 3],
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: u64,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct AugmentationStudyArgs {
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "none,vertical,vertical-horizontal"
    )]
    pub arms: Vec<ArmArg>,
    #[command(flatten)]
    pub bench: BenchmarkArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ArchitectureStudyArgs {
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "branched,two-stage,monolithic"
    )]
    pub archs: Vec<ArchArg>,
    #[command(flatten)]
    pub bench: BenchmarkArgs,
}

#[derive(Clone, Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated symptoms; adds a recommendation to the output.
    #[arg(long)]
    pub symptoms: Option<String>,
    /// Rules TOML [default: built-in example policy].
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Print the same JSON body the HTTP endpoint returns.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "HEALTHCAM_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "HEALTHCAM_RULES")]
    pub rules: Option<PathBuf>,
    #[arg(long, env = "HEALTHCAM_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Start without a checkpoint; predict endpoints answer 503 until a reload.
    #[arg(long)]
    pub allow_degraded: bool,
    /// Allowed browser origin; repeat for several. None allows any origin.
    #[arg(
        long = "cors-origin",
        env = "HEALTHCAM_CORS_ORIGINS",
        value_delimiter = ','
    )]
    pub cors_origins: Vec<String>,
    #[arg(long, default_value_t = healthcam_service::DEFAULT_BODY_LIMIT)]
    pub body_limit: usize,
}

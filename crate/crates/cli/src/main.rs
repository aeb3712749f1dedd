use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egoctx::evaluation::Task;
use egoctx::features::FeatureKind;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "egoctx",
    version,
    about = "Unsupervised scene context for wearable-camera frame streams"
)]
struct Cli {
    /// Seed for every randomized stage; recorded in each output header.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a seeded synthetic dataset (frames + manifest.csv) into --out.
    Synth(SynthArgs),
    /// Extract one descriptor for every manifest frame into <out>/<feature>.features.
    Extract(ExtractArgs),
    /// Fit a PCA, Isomap or SOM model on the training split.
    Fit {
        #[arg(value_enum)]
        method: FitMethod,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a hyperparameter range without labels.
    Sweep {
        #[arg(value_enum)]
        what: SweepKind,
        #[command(flatten)]
        data: DataArgs,
        /// Neighbor counts for `isomap-k`.
        #[arg(long, value_delimiter = ',', default_value = "4,8,12,16,20")]
        k_values: Vec<usize>,
        /// Grid sides for `som-size`.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,30")]
        sizes: Vec<usize>,
        /// Output dimension for `isomap-k`.
        #[arg(long, default_value_t = 2)]
        components: usize,
    },
    /// Classify test frames by majority vote over a manifold (or a supervised baseline).
    EvalContext {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "som")]
        method: Vec<EvalMethod>,
        #[arg(long, value_enum, default_value = "both")]
        task: TaskArg,
    },
    /// Greedy importance-ordered fusion curve over a concatenated descriptor.
    Fuse {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 30)]
        som_size: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, default_value_t = egoctx::fusion::DEFAULT_MAX_DIMS)]
        max_dims: usize,
        #[arg(long, value_enum, default_value = "location")]
        task: SingleTask,
    },
    /// Train the context-switched hand detector.
    HanddetTrain(HanddetArgs),
    /// Evaluate a trained hand detector against the global baseline.
    HanddetEval {
        #[command(flatten)]
        common: HanddetArgs,
        /// Detector file; defaults to <out>/multimodel_detector.json.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Draw figures for a saved PCA, Isomap or SOM model.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    locations: usize,
    #[arg(long, default_value_t = 80)]
    frames: usize,
    #[arg(long, default_value_t = 0.4)]
    indoor_fraction: f64,
    #[arg(long, default_value_t = 128)]
    width: u32,
    #[arg(long, default_value_t = 72)]
    height: u32,
    /// Full generator configuration as JSON; overrides the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_feature, default_value = "hsv")]
    feature: FeatureKind,
    #[command(flatten)]
    descriptor: DescriptorArgs,
}

#[derive(Args, Debug, Clone)]
struct DescriptorArgs {
    /// Histogram bins per color channel.
    #[arg(long)]
    bins: Option<usize>,
    /// GIST working resolution, e.g. 128x128.
    #[arg(long, value_parser = parse_size)]
    gist_resize: Option<(usize, usize)>,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_feature, default_value = "hsv")]
    feature: FeatureKind,
    /// Feature file; defaults to <out>/<feature>.features.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 30)]
    som_size: usize,
    #[arg(long, default_value_t = 12)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 2)]
    components: usize,
    /// Neighbors consulted by the PCA/Isomap vote.
    #[arg(long, default_value_t = egoctx::evaluation::DEFAULT_VOTE_K)]
    vote_k: usize,
}

#[derive(Args, Debug)]
struct HanddetArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Context descriptor used to pick the local model.
    #[arg(long, value_parser = parse_feature, default_value = "hsv")]
    feature: FeatureKind,
    #[command(flatten)]
    descriptor: DescriptorArgs,
    #[arg(long, default_value_t = egoctx::handswitch::DEFAULT_GRID)]
    som_size: usize,
    /// Neurons with fewer training frames fall back to the global model.
    #[arg(long)]
    min_train: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FitMethod {
    Pca,
    Isomap,
    Som,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepKind {
    IsomapK,
    SomSize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EvalMethod {
    Som,
    Pca,
    Isomap,
    Rf,
    Svm,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TaskArg {
    IndoorOutdoor,
    Location,
    Both,
}

impl TaskArg {
    fn tasks(self) -> Vec<Task> {
        match self {
            TaskArg::IndoorOutdoor => vec![Task::IndoorOutdoor],
            TaskArg::Location => vec![Task::Location],
            TaskArg::Both => vec![Task::IndoorOutdoor, Task::Location],
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SingleTask {
    IndoorOutdoor,
    Location,
}

impl From<SingleTask> for Task {
    fn from(t: SingleTask) -> Self {
        match t {
            SingleTask::IndoorOutdoor => Task::IndoorOutdoor,
            SingleTask::Location => Task::Location,
        }
    }
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: egoctx::Error| e.to_string())
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((
        w.parse().map_err(|_| "bad width")?,
        h.parse().map_err(|_| "bad height")?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `bootvid`: generate synthetic video, train in two stages, evaluate and
//! render.
//!
//! Exit status is 0 on success, 1 on runtime failure and 2 on usage or
//! contract errors. Log verbosity comes from `BOOTVID_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `info`).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bootvid_core::evalmetrics::ScaleMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bootvid", version, about = "Bootstrapped self-supervised depth, segmentation and ego-motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset.
    GenData(GenData),
    /// Supervised stage on labeled frames.
    TrainSup(Train),
    /// Self-supervised stage on unlabeled frames, from a checkpoint.
    TrainSelfsup(Train),
    /// Evaluate a checkpoint (or stored predictions) on a dataset.
    Eval(Eval),
    /// Write input | ground truth | prediction panels for one frame.
    Render(Render),
}

#[derive(Args, Debug)]
struct GenData {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 6)]
    classes: usize,
    /// Add an independently moving object.
    #[arg(long)]
    dynamic: bool,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Keep depth and labels only on every n-th frame.
    #[arg(long, default_value_t = 1)]
    label_stride: usize,
    /// First frame index along the camera path.
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long, default_value_t = 3)]
    supersample: usize,
    /// Replace a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug, Clone)]
struct Train {
    /// JSON file with TrainConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint to start from (required for train-selfsup).
    #[arg(long)]
    ckpt_in: Option<PathBuf>,
    #[arg(long)]
    ckpt_out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Defaults to train_log.jsonl beside the output checkpoint.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    no_augment: bool,
    /// Loss weight preset: sn2sn, sun2sn, cs2cs or cs2k.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    snippet_stride: Option<usize>,
    #[arg(long)]
    snippet_skip: Option<usize>,
    /// Supervised stage: keep depth and labels only on every n-th frame.
    #[arg(long, alias = "labels")]
    label_stride: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Task {
    Depth,
    Seg,
    Odom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Median,
    None,
}

impl From<ScaleArg> for ScaleMode {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Median => ScaleMode::Median,
            ScaleArg::None => ScaleMode::None,
        }
    }
}

#[derive(Args, Debug)]
struct Eval {
    #[arg(long, required_unless_present = "pred", conflicts_with = "pred")]
    ckpt: Option<PathBuf>,
    /// Dataset-layout directory holding predicted depth, labels or poses.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long, value_enum, default_value = "median")]
    scale_mode: ScaleArg,
    /// Directory for the report file.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    snippet_stride: usize,
    #[arg(long, default_value_t = 10)]
    snippet_skip: usize,
}

#[derive(Args, Debug)]
struct Render {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    frame: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let env = env_logger::Env::new().filter_or("BOOTVID_LOG", "info");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
